"""
Evaluation Results
Metric reports, throughput benchmarks and ID-title probe transcripts
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field, model_validator

from app.core.artifacts import write_csv, write_json

# Wall-clock fields never enter metrics JSON; they go to timing.json
TIMING_FIELDS = {"samples_per_second", "elapsed_seconds"}


def metric_key(name: str, k: int) -> str:
    return f"{name}@{k}"


class MetricReport(BaseModel):
    """
    NDCG@K and HR@K per configured K for one evaluation run

    `metrics` keys are "ndcg@K" and "hr@K"; every value lies in [0, 1].
    """
    mode: str = Field(..., description="What was evaluated: logits, popularity, oracle, markov, a variant...")
    ks: List[int]
    metrics: Dict[str, float] = Field(default_factory=dict)
    sample_count: int = Field(..., ge=1)
    fingerprint: Optional[str] = None
    seed: Optional[int] = None
    metadata: Dict[str, Any] = Field(default_factory=dict)

    samples_per_second: Optional[float] = Field(None, description="Wall-clock throughput")
    elapsed_seconds: Optional[float] = None

    @model_validator(mode="after")
    def check_bounds(self):
        for key, value in self.metrics.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Metric {key}={value} outside [0, 1]")
        return self

    def ndcg(self, k: int) -> float:
        return self.metrics[metric_key("ndcg", k)]

    def hr(self, k: int) -> float:
        return self.metrics[metric_key("hr", k)]

    def deterministic_payload(self) -> Dict[str, Any]:
        return self.model_dump(mode="json", exclude=TIMING_FIELDS)

    def to_json(self, path: Union[str, Path]) -> Path:
        """Canonical JSON without wall-clock fields; equal runs give equal bytes"""
        return write_json(path, self.deterministic_payload())

    def timing(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "sample_count": self.sample_count,
            "samples_per_second": self.samples_per_second,
            "elapsed_seconds": self.elapsed_seconds,
        }

    def csv_rows(self) -> List[Dict[str, Any]]:
        return [
            {
                "mode": self.mode,
                "k": k,
                "ndcg": self.ndcg(k),
                "hr": self.hr(k),
                "sample_count": self.sample_count,
                "fingerprint": self.fingerprint,
                "seed": self.seed,
            }
            for k in self.ks
        ]

    def to_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(
            path,
            self.csv_rows(),
            columns=["mode", "k", "ndcg", "hr", "sample_count", "fingerprint", "seed"]
        )


class BenchmarkResult(BaseModel):
    """Throughput of one inference mode"""
    mode: str = Field(..., description="logits or generative")
    samples: int
    forward_passes: int = Field(..., description="Instrumented forward calls over timed samples")
    passes_per_sample: float
    samples_per_second: float
    elapsed_seconds: float
    latencies: List[float] = Field(default_factory=list, description="Per-sample seconds")
    passes: List[int] = Field(default_factory=list, description="Per-sample forward calls")

    def latency_rows(self) -> List[Dict[str, Any]]:
        return [
            {"mode": self.mode, "sample": i, "latency_seconds": latency, "forward_passes": passes}
            for i, (latency, passes) in enumerate(zip(self.latencies, self.passes))
        ]

    def to_csv(self, path: Union[str, Path]) -> Path:
        return write_csv(
            path,
            self.latency_rows(),
            columns=["mode", "sample", "latency_seconds", "forward_passes"]
        )


class BenchmarkComparison(BaseModel):
    """Logits-mode vs generative-mode throughput"""
    logits: BenchmarkResult
    generative: BenchmarkResult
    speedup: float = Field(..., description="logits samples/s divided by generative samples/s")
    mean_title_length: float
    fingerprint: Optional[str] = None
    seed: Optional[int] = None

    def summary(self) -> Dict[str, Any]:
        return {
            "fingerprint": self.fingerprint,
            "seed": self.seed,
            "mean_title_length": self.mean_title_length,
            "speedup": self.speedup,
            "modes": {
                r.mode: {
                    "samples": r.samples,
                    "forward_passes": r.forward_passes,
                    "passes_per_sample": r.passes_per_sample,
                    "samples_per_second": r.samples_per_second,
                    "elapsed_seconds": r.elapsed_seconds,
                }
                for r in (self.logits, self.generative)
            },
        }


class ProbeLine(BaseModel):
    item_index: int
    item_token: str
    expected: str
    decoded: str
    match: bool


class ProbeResult(BaseModel):
    """Fraction of probed items whose title is reproduced after their ID token"""
    fraction: float = Field(..., ge=0.0, le=1.0)
    items: List[ProbeLine] = Field(default_factory=list)
    fingerprint: Optional[str] = None
    seed: Optional[int] = None

    def transcript(self) -> str:
        lines = [
            f"# fingerprint={self.fingerprint} seed={self.seed}",
            f"# match fraction {self.fraction:.4f} over {len(self.items)} items",
        ]
        for line in self.items:
            status = "MATCH" if line.match else "MISS"
            lines.append(
                f"{line.item_token} expected=\"{line.expected}\" decoded=\"{line.decoded}\" {status}"
            )
        return "\n".join(lines) + "\n"

    def to_text(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.transcript(), encoding="utf-8")
        return path
