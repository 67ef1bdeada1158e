"""Figure rendering for qdimer CSV outputs."""

from .render import RecipeError, load_recipe, render, shipped_recipes

__version__ = "0.1.0"
