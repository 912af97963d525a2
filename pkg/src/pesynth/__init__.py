"""Per-example program synthesis with a learned cross-example aggregator."""
from .dsl import DslConfig, Program, enumerate_vocabulary, execute_program, format_program, parse_program
from .search import Models, PipelineConfig, SearchBudget, synthesize

__all__ = ["DslConfig", "Program", "enumerate_vocabulary", "execute_program", "format_program",
           "parse_program", "Models", "PipelineConfig", "SearchBudget", "synthesize"]
__version__ = "0.1.0"
