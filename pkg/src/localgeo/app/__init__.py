"""Application layer: configuration, pipeline wiring, CLI and HTTP service."""
