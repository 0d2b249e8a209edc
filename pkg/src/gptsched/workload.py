"""Trace I/O and seeded synthetic workload generation.

Trace format. One JSON object per line (JSON Lines, UTF-8, LF endings)
with keys in this order:

    id, task_kind, model_params_b, prompt_tokens, output_tokens,
    demand {compute, memory_gib, storage_gib}, arrival_s, duration_s,
    deadline_s

The first five are required; demand and the timing fields are optional and
omitted when absent. Floats are written with Python's shortest round-trip
repr so a write/load cycle reproduces the exact request list.

Random generator. All sampling uses SplitMix64, a tiny, well-known 64-bit
generator chosen so a reimplementation in any language reproduces the same
traces from the same seed. Derived draws are fixed too: uniforms map the
top 53 bits onto [0, 1), normals use Box-Muller (two uniforms each, cosine
branch), exponentials use inversion, categorical picks walk cumulative
probabilities. Per request the draw order is: model size (1 uniform),
prompt tokens (2), output tokens (2), task kind (1), then arrival gap (1,
only when an arrival rate is set) and duration (2, only when a duration
distribution is set). Token counts are rounded half-even and clamped to
[1, 32768].
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, IO, List, Optional, Sequence, Tuple, Union

from .model import (
    GptRequest,
    GptSchedError,
    ResourceVector,
    TaskKind,
    ValidationError,
)

MIN_TOKENS = 1
MAX_TOKENS = 32768

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15

Source = Union[str, Path, IO[str]]


class TraceParseError(GptSchedError):
    """A trace line could not be parsed or validated. Carries line_no."""

    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SplitMix64:
    """SplitMix64: state += golden gamma; output = xor-shift-multiply mix.

    Public-domain constants (Steele, Lea, Flood 2014). Uniform doubles use
    the top 53 bits, so results are identical on any IEEE-754 platform.
    """

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN_GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """One double in [0, 1)."""

        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self) -> float:
        """Standard normal via Box-Muller, cosine branch. Two uniforms."""

        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)

    def lognormal(self, mu: float, sigma: float) -> float:
        return math.exp(mu + sigma * self.normal())

    def exponential(self, rate: float) -> float:
        """Exponential gap with the given rate, by inversion. One uniform."""

        return -math.log(1.0 - self.uniform()) / rate

    def pick(self, cumulative: Sequence[float]) -> int:
        """Index of the first cumulative edge exceeding one uniform draw."""

        u = self.uniform()
        for index, edge in enumerate(cumulative):
            if u < edge:
                return index
        return len(cumulative) - 1


@dataclass(frozen=True)
class LognormalSpec:
    """Parameters of a lognormal distribution: exp(mu + sigma * N(0,1))."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.mu) or not math.isfinite(self.sigma) or self.sigma < 0.0:
            raise ValidationError(f"lognormal parameters must be finite with sigma >= 0, got {self}")


@dataclass(frozen=True)
class GeneratorSpec:
    """Knobs of the synthetic workload generator.

    model_size_choices_b pairs (params_b, probability); probabilities must
    sum to 1 within 1e-9. arrival_rate_per_s switches on Poisson arrivals
    (cumulative exponential gaps); duration_dist switches on lognormal
    service durations. Both default off, producing batch-only traces.
    """

    request_count: int = 1000
    seed: int = 42
    model_size_choices_b: Tuple[Tuple[float, float], ...] = ((7.0, 0.6), (13.0, 0.3), (70.0, 0.1))
    prompt_tokens_dist: LognormalSpec = LognormalSpec(5.5, 0.8)
    output_tokens_dist: LognormalSpec = LognormalSpec(5.0, 1.0)
    arrival_rate_per_s: Optional[float] = None
    duration_dist: Optional[LognormalSpec] = None

    def __post_init__(self) -> None:
        if not isinstance(self.request_count, int) or self.request_count <= 0:
            raise ValidationError(f"request_count must be a positive int, got {self.request_count!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed <= _MASK64:
            raise ValidationError(f"seed must be an unsigned 64-bit int, got {self.seed!r}")
        choices = tuple((float(size), float(prob)) for size, prob in self.model_size_choices_b)
        object.__setattr__(self, "model_size_choices_b", choices)
        if not choices:
            raise ValidationError("model_size_choices_b must not be empty")
        for size, prob in choices:
            if not math.isfinite(size) or size <= 0.0:
                raise ValidationError(f"model size must be finite and > 0, got {size!r}")
            if not math.isfinite(prob) or prob < 0.0:
                raise ValidationError(f"model probability must be finite and >= 0, got {prob!r}")
        total = sum(prob for _, prob in choices)
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"model probabilities must sum to 1 within 1e-9, got {total!r}")
        if self.arrival_rate_per_s is not None:
            rate = self.arrival_rate_per_s
            if not math.isfinite(rate) or rate <= 0.0:
                raise ValidationError(f"arrival_rate_per_s must be finite and > 0, got {rate!r}")


DEFAULT_GENERATOR_SPEC = GeneratorSpec()

# Fixed order used when sampling a task kind (one uniform scaled by 5).
_TASK_KINDS = (
    TaskKind.TRANSLATION,
    TaskKind.SUMMARIZATION,
    TaskKind.QA,
    TaskKind.CHAT,
    TaskKind.OTHER,
)


def _clamp_tokens(value: float) -> int:
    return min(MAX_TOKENS, max(MIN_TOKENS, int(round(value))))


def generate_synthetic(spec: GeneratorSpec) -> List[GptRequest]:
    """Generate spec.request_count requests, a pure function of spec.

    Ids run req-000001, req-000002, ... Arrival times, when enabled, are
    cumulative exponential gaps starting from 0.
    """

    rng = SplitMix64(spec.seed)
    cumulative: List[float] = []
    running = 0.0
    for _, prob in spec.model_size_choices_b:
        running += prob
        cumulative.append(running)

    requests: List[GptRequest] = []
    arrival = 0.0
    for n in range(1, spec.request_count + 1):
        params = spec.model_size_choices_b[rng.pick(cumulative)][0]
        prompt = _clamp_tokens(rng.lognormal(spec.prompt_tokens_dist.mu, spec.prompt_tokens_dist.sigma))
        output = _clamp_tokens(rng.lognormal(spec.output_tokens_dist.mu, spec.output_tokens_dist.sigma))
        kind = _TASK_KINDS[min(4, int(rng.uniform() * 5.0))]
        arrival_s: Optional[float] = None
        duration_s: Optional[float] = None
        if spec.arrival_rate_per_s is not None:
            arrival += rng.exponential(spec.arrival_rate_per_s)
            arrival_s = arrival
        if spec.duration_dist is not None:
            duration_s = rng.lognormal(spec.duration_dist.mu, spec.duration_dist.sigma)
        requests.append(
            GptRequest(
                id=f"req-{n:06d}",
                task_kind=kind,
                model_params_b=params,
                prompt_tokens=prompt,
                output_tokens=output,
                arrival_s=arrival_s,
                duration_s=duration_s,
            )
        )
    return requests


def request_to_dict(request: GptRequest) -> Dict[str, object]:
    """Trace-schema dict for one request, keys in canonical order."""

    record: Dict[str, object] = {
        "id": request.id,
        "task_kind": request.task_kind.value,
        "model_params_b": request.model_params_b,
        "prompt_tokens": request.prompt_tokens,
        "output_tokens": request.output_tokens,
    }
    if request.explicit_demand is not None:
        demand = request.explicit_demand
        record["demand"] = {
            "compute": demand.compute,
            "memory_gib": demand.memory_gib,
            "storage_gib": demand.storage_gib,
        }
    if request.arrival_s is not None:
        record["arrival_s"] = request.arrival_s
    if request.duration_s is not None:
        record["duration_s"] = request.duration_s
    if request.deadline_s is not None:
        record["deadline_s"] = request.deadline_s
    return record


def _require_number(obj: Dict[str, object], key: str, line_no: int) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TraceParseError(line_no, f"field {key!r} must be a number, got {value!r}")
    if not math.isfinite(float(value)):
        raise TraceParseError(line_no, f"field {key!r} must be finite, got {value!r}")
    return float(value)


def _require_int(obj: Dict[str, object], key: str, line_no: int) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise TraceParseError(line_no, f"field {key!r} must be an integer, got {value!r}")
    return value


_REQUIRED_KEYS = ("id", "task_kind", "model_params_b", "prompt_tokens", "output_tokens")
_OPTIONAL_KEYS = ("demand", "arrival_s", "duration_s", "deadline_s")
_DEMAND_KEYS = ("compute", "memory_gib", "storage_gib")


def request_from_dict(obj: Dict[str, object], line_no: int = 0) -> GptRequest:
    """Parse one trace record, raising TraceParseError on any violation."""

    if not isinstance(obj, dict):
        raise TraceParseError(line_no, f"record must be a JSON object, got {type(obj).__name__}")
    for key in _REQUIRED_KEYS:
        if key not in obj:
            raise TraceParseError(line_no, f"missing required field {key!r}")
    unknown = set(obj) - set(_REQUIRED_KEYS) - set(_OPTIONAL_KEYS)
    if unknown:
        raise TraceParseError(line_no, f"unknown fields {sorted(unknown)}")

    request_id = obj["id"]
    if not isinstance(request_id, str) or not request_id:
        raise TraceParseError(line_no, f"field 'id' must be a non-empty string, got {request_id!r}")
    kind_value = obj["task_kind"]
    try:
        kind = TaskKind(kind_value)
    except ValueError:
        raise TraceParseError(line_no, f"unknown task_kind {kind_value!r}") from None

    demand: Optional[ResourceVector] = None
    if "demand" in obj:
        raw = obj["demand"]
        if not isinstance(raw, dict) or set(raw) != set(_DEMAND_KEYS):
            raise TraceParseError(line_no, f"field 'demand' must have exactly keys {_DEMAND_KEYS}")
        values = {key: _require_number(raw, key, line_no) for key in _DEMAND_KEYS}
        try:
            demand = ResourceVector(**values)
        except ValidationError as exc:
            raise TraceParseError(line_no, str(exc)) from None

    params = _require_number(obj, "model_params_b", line_no)
    if demand is None and params <= 0.0:
        raise TraceParseError(
            line_no, "request without explicit demand must have model_params_b > 0"
        )

    kwargs: Dict[str, object] = {}
    for key in ("arrival_s", "duration_s", "deadline_s"):
        if key in obj:
            kwargs[key] = _require_number(obj, key, line_no)
    try:
        return GptRequest(
            id=request_id,
            task_kind=kind,
            model_params_b=params,
            prompt_tokens=_require_int(obj, "prompt_tokens", line_no),
            output_tokens=_require_int(obj, "output_tokens", line_no),
            explicit_demand=demand,
            **kwargs,
        )
    except ValidationError as exc:
        raise TraceParseError(line_no, str(exc)) from None


def _open_source(source: Source) -> Tuple[IO[str], bool]:
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8", newline=""), True
    return source, False


def _open_sink(sink: Source) -> Tuple[IO[str], bool]:
    if isinstance(sink, (str, Path)):
        return open(sink, "w", encoding="utf-8", newline=""), True
    return sink, False


def load_trace(source: Source) -> List[GptRequest]:
    """Read a JSON Lines trace from a path or text stream.

    Blank lines are skipped. Raises TraceParseError (with the 1-based line
    number) for malformed lines, unknown fields, constraint violations and
    duplicate request ids.
    """

    stream, owned = _open_source(source)
    try:
        requests: List[GptRequest] = []
        seen: Dict[str, int] = {}
        for line_no, line in enumerate(stream, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise TraceParseError(line_no, f"invalid JSON: {exc.msg}") from None
            request = request_from_dict(obj, line_no)
            if request.id in seen:
                raise TraceParseError(
                    line_no, f"duplicate request id {request.id!r} (first seen on line {seen[request.id]})"
                )
            seen[request.id] = line_no
            requests.append(request)
        return requests
    finally:
        if owned:
            stream.close()


def write_trace(requests: Sequence[GptRequest], sink: Source) -> None:
    """Write requests as JSON Lines to a path or text stream."""

    stream, owned = _open_sink(sink)
    try:
        for request in requests:
            stream.write(json.dumps(request_to_dict(request), separators=(",", ":")))
            stream.write("\n")
    finally:
        if owned:
            stream.close()


def trace_to_string(requests: Sequence[GptRequest]) -> str:
    """The exact bytes write_trace would produce, as a string."""

    buffer = io.StringIO()
    write_trace(requests, buffer)
    return buffer.getvalue()
