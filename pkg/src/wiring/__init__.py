"""Wirings, restricted and input views, foreign keys."""
