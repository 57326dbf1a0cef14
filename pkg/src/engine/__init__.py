"""Agent-based simulation engine."""
