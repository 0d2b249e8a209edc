"""Demand profiling: explicit pass-through and the linear estimate."""

from __future__ import annotations

import pytest

from gptsched import (
    ProfilerCoefficients,
    ResourceVector,
    UnprofilableRequestError,
    ValidationError,
    estimate_demand,
)

from helpers import profiled_request, request


def test_explicit_demand_wins_unchanged() -> None:
    explicit = ResourceVector(compute=12.0, memory_gib=3.0, storage_gib=9.0)
    r = request("r1", compute=12.0, memory=3.0, storage=9.0)
    assert estimate_demand(r) == explicit


def test_zero_token_request_costs_weights_only() -> None:
    # 7B model, no tokens: no compute, weight memory 14 GiB, storage 14 GiB.
    d = estimate_demand(profiled_request("r1", params_b=7.0))
    assert d.compute == pytest.approx(0.0, abs=1e-12)
    assert d.memory_gib == pytest.approx(14.0, abs=1e-9)
    assert d.storage_gib == pytest.approx(14.0, abs=1e-9)


def test_default_coefficients_on_thousand_tokens() -> None:
    # 7B model, 500 + 500 tokens: compute 0.002*7*1000 = 14,
    # memory 14 + 0.02*7*1 = 14.14, storage 14.
    d = estimate_demand(profiled_request("r1", params_b=7.0, prompt=500, output=500))
    assert d.compute == pytest.approx(14.0, abs=1e-9)
    assert d.memory_gib == pytest.approx(14.14, abs=1e-9)
    assert d.storage_gib == pytest.approx(14.0, abs=1e-9)


def test_demand_scales_linearly_with_model_size() -> None:
    small = estimate_demand(profiled_request("r1", params_b=7.0, prompt=200, output=100))
    large = estimate_demand(profiled_request("r2", params_b=70.0, prompt=200, output=100))
    assert large.compute == pytest.approx(10 * small.compute, rel=1e-12)
    assert large.memory_gib == pytest.approx(10 * small.memory_gib, rel=1e-12)
    assert large.storage_gib == pytest.approx(10 * small.storage_gib, rel=1e-12)


def test_custom_coefficients_apply() -> None:
    coeffs = ProfilerCoefficients(
        flops_per_param_token=0.01,
        weight_mem_gib_per_b=1.0,
        kv_mem_gib_per_ktoken_per_b=0.0,
        storage_gib_per_b=3.0,
    )
    d = estimate_demand(profiled_request("r1", params_b=2.0, prompt=100, output=0), coeffs)
    assert d.compute == pytest.approx(2.0)
    assert d.memory_gib == pytest.approx(2.0)
    assert d.storage_gib == pytest.approx(6.0)


def test_unprofilable_request_raises() -> None:
    bare = profiled_request("r1", params_b=0.0)
    with pytest.raises(UnprofilableRequestError):
        estimate_demand(bare)


def test_coefficients_validated() -> None:
    with pytest.raises(ValidationError):
        ProfilerCoefficients(flops_per_param_token=-0.1)
    with pytest.raises(ValidationError):
        ProfilerCoefficients(weight_mem_gib_per_b=float("inf"))
