"""Piecewise linear strain Cosserat rod models."""
