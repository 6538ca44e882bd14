"""Prompt rendering, provider calls and structured-response parsing."""
from gexprobe.llm_harness.agents import AgentConfig, BatchRequest, HttpAgent, MockAgent, mock_agent
from gexprobe.llm_harness.harness import DetectionJournal, LeakInterceptor, batches, run_batch
from gexprobe.llm_harness.parsing import (
    Classification,
    DetectionResult,
    classify,
    parse_batch,
    parse_response,
    read_detections,
    write_detections,
)
from gexprobe.llm_harness.templates import (
    BIASED,
    UNBIASED,
    PromptTemplate,
    default_template,
    render_batch,
    render_prompt,
)

__all__ = [
    "AgentConfig", "BatchRequest", "HttpAgent", "MockAgent", "mock_agent",
    "DetectionJournal", "LeakInterceptor", "batches", "run_batch",
    "Classification", "DetectionResult", "classify", "parse_batch", "parse_response",
    "read_detections", "write_detections",
    "BIASED", "UNBIASED", "PromptTemplate", "default_template", "render_batch", "render_prompt",
]
