"""HTTP layer wrapping the analysis pipeline."""
