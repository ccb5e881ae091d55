"""Pytest fixtures for robust loss lab tests."""

import csv
import json
from collections.abc import Callable
from pathlib import Path
from typing import Any

import pytest

from robust_loss_lab.distributions import NoiseFamily, NoiseSpec
from robust_loss_lab.toyfit import PolyModel, ToyConfig

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    """Directory holding golden files."""
    return FIXTURES


@pytest.fixture
def detector_golden() -> dict[str, dict[str, str]]:
    """Expected uncertainty table, column name -> row label -> rendered cell."""
    with (FIXTURES / "two_stage_detector.csv").open(encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    header, body = rows[0], rows[1:]
    return {
        name: {row[0]: row[index] for row in body}
        for index, name in enumerate(header)
        if index > 0
    }


@pytest.fixture
def quadratic_config() -> ToyConfig:
    """Small noiseless problem where gradient descent reaches least squares."""
    return ToyConfig(
        theta_star=PolyModel((1.0, -2.0, 0.5)),
        fit_degree_count=3,
        n_samples=50,
        delta=2.0,
        noise=NoiseSpec(NoiseFamily.NONE, 0.0),
        seed=7,
    )


@pytest.fixture
def tiny_sweep_config() -> ToyConfig:
    """Cheap noisy problem for sweep plumbing tests."""
    return ToyConfig(
        theta_star=PolyModel((1.0, -2.0, 0.5)),
        fit_degree_count=3,
        n_samples=40,
        delta=2.0,
        noise=NoiseSpec(NoiseFamily.LAPLACE, 1.0),
        seed=11,
    )


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[dict[str, Any]], Path]:
    """Write a RunConfig document and return its path."""

    def _write(document: dict[str, Any]) -> Path:
        path = tmp_path / "run.json"
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return _write
