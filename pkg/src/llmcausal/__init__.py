"""Data-driven causal discovery with LLM prompting."""
