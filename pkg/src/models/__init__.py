"""Domain data structures and errors."""
