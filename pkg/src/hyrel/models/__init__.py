"""Bundled example models: relational specifications, SMV machines,
HyperLTL properties, and benchmark suite descriptions."""

from importlib import resources


def model_path(name):
    return resources.files(__package__) / name


def model_text(name):
    return model_path(name).read_text()
