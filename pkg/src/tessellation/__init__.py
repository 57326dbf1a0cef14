"""Weighted squared tessellations, relevance and distances."""
