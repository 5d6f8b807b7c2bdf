"""duorag: dual-perspective retrieval-augmented question answering.

Retrieve chunks, lift them back to source paragraphs, extract the global
information, filter chunks against a guiding chain of thought, and answer
from both perspectives. Ships with deterministic mock backends so every
pipeline is runnable and testable offline, an instruction-data builder,
and a token-F1 evaluation harness.
"""

from .chunking import Chunk, ChunkPolicy, chunk_corpus, chunk_paragraph, split_sentences
from .corpus import Corpus, Paragraph, QARecord, ingest_dataset, normalize_text
from .errors import DuoragError
from .evaluate import ExperimentRunner, f1_score, normalize_answer, results_to_csv
from .extract import MappedContext, extract_global, map_chunks
from .filtering import DetailSet, filter_chunks, guide_cot, parse_verdict
from .gateway import ApproxTokenCounter, GenerationParams, LlmCall, LlmGateway, MockBackend, mock_key
from .instruct import InstructPolicy, build_instruct_dataset
from .pipeline import Pipeline, PipelineOptions, Strategy, StrategyConfig
from .prompts import PromptTemplate, get_template, render
from .retrieval import HashEmbedder, HashPairScorer, RetrievalResult, build_index, retrieve

__version__ = "0.1.0"

__all__ = [
    "ApproxTokenCounter",
    "Chunk",
    "ChunkPolicy",
    "Corpus",
    "DetailSet",
    "DuoragError",
    "ExperimentRunner",
    "GenerationParams",
    "HashEmbedder",
    "HashPairScorer",
    "InstructPolicy",
    "LlmCall",
    "LlmGateway",
    "MappedContext",
    "MockBackend",
    "Paragraph",
    "Pipeline",
    "PipelineOptions",
    "PromptTemplate",
    "QARecord",
    "RetrievalResult",
    "Strategy",
    "StrategyConfig",
    "build_index",
    "build_instruct_dataset",
    "chunk_corpus",
    "chunk_paragraph",
    "extract_global",
    "f1_score",
    "filter_chunks",
    "get_template",
    "guide_cot",
    "ingest_dataset",
    "map_chunks",
    "mock_key",
    "normalize_answer",
    "normalize_text",
    "parse_verdict",
    "render",
    "results_to_csv",
    "retrieve",
    "split_sentences",
    "__version__",
]
