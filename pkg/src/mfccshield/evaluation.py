"""Attack quality metrics, transcription providers and batch reports."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .attack import AttackConfig, apply_noise, generate_noise
from .audio_io import AudioBuffer, encode_wav, read_wav
from .errors import (
    DimensionMismatch,
    EmptyReference,
    MfccShieldError,
    ProviderUnavailable,
    SilentInput,
    UnmappedClip,
    ValidationError,
)
from .mfcc import MfccConfig, analyze

_TOKEN_STRIP = re.compile(r"[^\w\s']")


@dataclass(frozen=True)
class Transcript:
    words: tuple[str, ...]

    @classmethod
    def from_text(cls, text: str) -> Transcript:
        """Lowercase, drop punctuation (apostrophes inside words kept), split on whitespace."""
        cleaned = _TOKEN_STRIP.sub(" ", text.lower())
        words = (w.strip("'") for w in cleaned.split())
        return cls(tuple(w for w in words if w))

    def __len__(self):
        return len(self.words)

    def __str__(self):
        return " ".join(self.words)


def _as_transcript(t) -> Transcript:
    return t if isinstance(t, Transcript) else Transcript.from_text(t)


def edit_distance(reference, hypothesis) -> int:
    """Word-level Levenshtein distance (S + D + I)."""
    ref, hyp = _as_transcript(reference).words, _as_transcript(hypothesis).words
    vocab: dict[str, int] = {}
    ref_ids = np.fromiter((vocab.setdefault(w, len(vocab)) for w in ref), dtype=np.int64, count=len(ref))
    hyp_ids = np.fromiter((vocab.setdefault(w, len(vocab)) for w in hyp), dtype=np.int64, count=len(hyp))
    return kernels.edit_distance(ref_ids, hyp_ids)


def word_error_rate(reference, hypothesis) -> float:
    ref = _as_transcript(reference)
    if not ref.words:
        raise EmptyReference("reference transcript has no words")
    return edit_distance(ref, hypothesis) / len(ref)


def feature_distortion(clean: np.ndarray, adv: np.ndarray) -> float:
    """Mean over frames of the Euclidean distance between cepstral vectors."""
    clean = np.asarray(clean, dtype=np.float64)
    adv = np.asarray(adv, dtype=np.float64)
    if clean.shape != adv.shape:
        raise DimensionMismatch(f"feature shapes differ: {clean.shape} vs {adv.shape}")
    return float(np.mean(np.linalg.norm(adv - clean, axis=1)))


def snr_db(signal, noise) -> float:
    signal = np.asarray(getattr(signal, "samples", signal), dtype=np.float64)
    noise = np.asarray(getattr(noise, "samples", noise), dtype=np.float64)
    p_noise = float(np.mean(noise * noise))
    if p_noise == 0.0:
        return math.inf
    return 10.0 * math.log10(float(np.mean(signal * signal)) / p_noise)


def random_noise_baseline(buffer: AudioBuffer, target_snr_db: float, seed: int = 0) -> AudioBuffer:
    """Add zero-mean uniform noise at ``target_snr_db``, deterministic per seed."""
    x = buffer.samples
    p_signal = float(np.mean(x * x))
    if p_signal == 0.0:
        raise SilentInput("SNR is undefined for a silent clip")
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, x.size)
    noise -= noise.mean()
    if not noise.any():
        noise[:] = 1.0  # single-sample clips
    noise *= math.sqrt(p_signal / 10.0 ** (target_snr_db / 10.0) / float(np.mean(noise * noise)))
    out = np.clip(x + noise, -1.0, 1.0)
    if abs(snr_db(x, out - x) - target_snr_db) > 0.01:
        out = _match_clipped_snr(x, noise, target_snr_db)
    return AudioBuffer(out, buffer.sample_rate)


def _match_clipped_snr(x: np.ndarray, noise: np.ndarray, target_snr_db: float) -> np.ndarray:
    """Rescale ``noise`` so the SNR measured after clamping hits the target.

    Clamping near full scale removes part of the noise; the clamped noise
    power grows monotonically with the scale, so bisect on it.
    """
    lo, hi = 1.0, 2.0
    while snr_db(x, np.clip(x + hi * noise, -1.0, 1.0) - x) > target_snr_db and hi < 1e6:
        lo, hi = hi, 2.0 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if snr_db(x, np.clip(x + mid * noise, -1.0, 1.0) - x) > target_snr_db:
            lo = mid
        else:
            hi = mid
    return np.clip(x + hi * noise, -1.0, 1.0)


# -- transcription providers ------------------------------------------------

class StubProvider:
    """Offline provider backed by a clip-id to transcript mapping.

    Adversarial audio is looked up under ``"<clip_id>/adv"`` first, falling
    back to the plain clip id.
    """

    kind = "stub"

    def __init__(self, mapping: dict[str, str]):
        self.mapping = dict(mapping)

    @classmethod
    def from_file(cls, path) -> StubProvider:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValidationError(f"{path}: stub mapping must be a JSON object")
        return cls({str(k): str(v) for k, v in data.items()})

    def transcribe(self, buffer: AudioBuffer, clip_id: str) -> Transcript:
        for key in (clip_id, clip_id.split("/")[0]):
            if key in self.mapping:
                return Transcript.from_text(self.mapping[key])
        raise UnmappedClip(clip_id)


class ExternalProvider:
    """HTTP transcription client.

    POSTs the clip as ``audio/wav`` to ``endpoint`` and reads the transcript
    from the JSON response's ``text`` (or ``transcript``) field. A bearer
    token is taken from the environment variable named ``token_env``.
    Concurrent requests are bounded by ``max_concurrent``.
    """

    kind = "external"

    def __init__(self, endpoint: str, token_env: str | None = None, timeout_ms: float = 30000.0,
                 max_concurrent: int = 4):
        self.endpoint = endpoint
        self.token_env = token_env
        self.timeout_ms = timeout_ms
        self._slots = threading.BoundedSemaphore(max_concurrent)

    @classmethod
    def from_config(cls, config: dict) -> ExternalProvider:
        try:
            endpoint = config["endpoint"]
        except KeyError:
            raise ValidationError("external provider config needs 'endpoint'") from None
        return cls(endpoint, config.get("token_env"), float(config.get("timeout_ms", 30000.0)),
                   int(config.get("max_concurrent", 4)))

    def transcribe(self, buffer: AudioBuffer, clip_id: str) -> Transcript:
        headers = {"Content-Type": "audio/wav", "X-Clip-Id": clip_id}
        if self.token_env and os.environ.get(self.token_env):
            headers["Authorization"] = f"Bearer {os.environ[self.token_env]}"
        request = urllib.request.Request(self.endpoint, data=encode_wav(buffer), headers=headers, method="POST")
        t0 = time.perf_counter()
        with self._slots:
            try:
                with urllib.request.urlopen(request, timeout=self.timeout_ms / 1000.0) as resp:
                    payload = json.loads(resp.read().decode("utf-8"))
            except (urllib.error.URLError, TimeoutError, OSError, ValueError) as exc:
                raise ProviderUnavailable(f"{self.endpoint}: {exc}", (time.perf_counter() - t0) * 1000.0) from exc
        text = payload.get("text", payload.get("transcript")) if isinstance(payload, dict) else None
        if not isinstance(text, str):
            raise ProviderUnavailable(f"{self.endpoint}: response has no transcript",
                                      (time.perf_counter() - t0) * 1000.0)
        return Transcript.from_text(text)


def transcribe(provider, buffer: AudioBuffer, clip_id: str) -> Transcript:
    return provider.transcribe(buffer, clip_id)


# -- batch ------------------------------------------------------------------

@dataclass
class PerturbationReport:
    clip_id: str
    error: str | None = None
    wer_clean: float | None = None
    wer_adv: float | None = None
    wer_adv_masked: float | None = None
    wer_baseline: float | None = None
    feature_distortion: float | None = None
    feature_distortion_masked: float | None = None
    feature_distortion_baseline: float | None = None
    noise_snr_db: float | None = None
    noise_snr_db_masked: float | None = None
    iterations: int = 0
    distortion_curve: list[float] = field(default_factory=list)
    timings_ms: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


AGGREGATE_COLUMNS = (
    "clip_id", "status", "iterations",
    "feature_distortion", "feature_distortion_masked", "feature_distortion_baseline",
    "noise_snr_db", "noise_snr_db_masked",
    "wer_clean", "wer_adv", "wer_adv_masked", "wer_baseline",
)


@dataclass
class BatchResult:
    reports: list[PerturbationReport]

    def ok(self) -> list[PerturbationReport]:
        return [r for r in self.reports if r.error is None]

    def means(self) -> dict[str, float | None]:
        keys = [c for c in AGGREGATE_COLUMNS if c not in ("clip_id", "status", "iterations")]
        out = {}
        for key in keys:
            vals = [getattr(r, key) for r in self.ok() if getattr(r, key) is not None]
            out[key] = float(np.mean(vals)) if vals else None
        return out

    def mean_curve(self) -> list[float]:
        curves = [r.distortion_curve for r in self.ok() if r.distortion_curve]
        if not curves:
            return []
        n = min(len(c) for c in curves)
        return [float(v) for v in np.mean([c[:n] for c in curves], axis=0)]

    def aggregate_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(AGGREGATE_COLUMNS)
        for r in self.reports:
            row = []
            for col in AGGREGATE_COLUMNS:
                if col == "status":
                    row.append("ok" if r.error is None else "error")
                    continue
                value = getattr(r, col)
                row.append("" if value is None else (f"{value:.6f}" if isinstance(value, float) else value))
            writer.writerow(row)
        return out.getvalue()

    def curve_csv(self) -> str:
        lines = ["iteration,mean_feature_distortion"]
        lines += [f"{i},{v:.6f}" for i, v in enumerate(self.mean_curve(), start=1)]
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "aggregate.csv").write_text(self.aggregate_csv())
        (out_dir / "curve.csv").write_text(self.curve_csv())
        summary = {"clips": len(self.reports), "succeeded": len(self.ok()), "means": self.means()}
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        reports_dir = out_dir / "reports"
        reports_dir.mkdir(exist_ok=True)
        for r in self.reports:
            safe = re.sub(r"[^\w.-]", "_", r.clip_id)
            (reports_dir / f"{safe}.json").write_text(r.to_json() + "\n")


def _evaluate_clip(clip_id, source, reference, mfcc_cfg, attack_cfg, provider, seed):
    report = PerturbationReport(clip_id=clip_id)
    try:
        t0 = time.perf_counter()
        buffer = source if isinstance(source, AudioBuffer) else read_wav(source)
        if not buffer.samples.any():
            raise SilentInput(f"clip {clip_id} is silent")
        clean = analyze(buffer.samples, buffer.sample_rate, mfcc_cfg).coeffs

        def distortion(noisy: AudioBuffer) -> float:
            return feature_distortion(clean, analyze(noisy.samples, noisy.sample_rate, mfcc_cfg).coeffs)

        t1 = time.perf_counter()
        reference_features = clean if attack_cfg.env_profile is None else None
        plain = generate_noise(buffer, mfcc_cfg, replace(attack_cfg, use_masking=False),
                               clean_features=reference_features)
        t2 = time.perf_counter()
        masked = generate_noise(buffer, mfcc_cfg, replace(attack_cfg, use_masking=True),
                                clean_features=reference_features)
        t3 = time.perf_counter()
        adv = apply_noise(buffer, plain)
        adv_masked = apply_noise(buffer, masked)
        report.iterations = plain.iterations
        report.feature_distortion = distortion(adv)
        report.feature_distortion_masked = distortion(adv_masked)
        report.noise_snr_db = snr_db(buffer, adv.samples - buffer.samples)
        report.noise_snr_db_masked = snr_db(buffer, adv_masked.samples - buffer.samples)
        baseline_snr = report.noise_snr_db if math.isfinite(report.noise_snr_db) else 60.0
        baseline = random_noise_baseline(buffer, baseline_snr, seed)
        report.feature_distortion_baseline = distortion(baseline)
        if attack_cfg.mode == "away-from-clean":
            report.distortion_curve = [float(np.sqrt(c)) for c in plain.costs]

        if provider is not None:
            ref = _as_transcript(reference or "")
            report.wer_clean = word_error_rate(ref, provider.transcribe(buffer, clip_id))
            report.wer_adv = word_error_rate(ref, provider.transcribe(adv, f"{clip_id}/adv"))
            report.wer_adv_masked = word_error_rate(ref, provider.transcribe(adv_masked, f"{clip_id}/adv_masked"))
            report.wer_baseline = word_error_rate(ref, provider.transcribe(baseline, f"{clip_id}/baseline"))
        report.timings_ms = {
            "load": (t1 - t0) * 1000.0,
            "generate": (t2 - t1) * 1000.0,
            "generate_masked": (t3 - t2) * 1000.0,
            "total": (time.perf_counter() - t0) * 1000.0,
        }
    except MfccShieldError as exc:
        report.error = f"{type(exc).__name__}: {exc}"
    return report


def run_batch(clips, mfcc_cfg: MfccConfig | None = None, attack_cfg: AttackConfig | None = None,
              provider=None, seed: int = 0, workers: int = 1) -> BatchResult:
    """Evaluate ``clips``, a sequence of ``(clip_id, wav path or AudioBuffer, reference text)``.

    Per-clip failures are recorded in that clip's report; the batch goes on.
    The distortion curve holds the root-mean-square cepstral deviation
    after each iteration.
    """
    mfcc_cfg = mfcc_cfg or MfccConfig()
    attack_cfg = attack_cfg or AttackConfig()
    jobs = [(cid, src, ref, mfcc_cfg, attack_cfg, provider, seed + i) for i, (cid, src, ref) in enumerate(clips)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(lambda job: _evaluate_clip(*job), jobs))
    else:
        reports = [_evaluate_clip(*job) for job in jobs]
    return BatchResult(reports)


MANIFEST_COLUMNS = ("clip_id", "wav_path", "reference_text")


def read_manifest(path) -> list[tuple[str, str, str]]:
    """Rows of a ``clip_id,wav_path,reference_text`` CSV; relative paths resolve against the manifest."""
    base = Path(path).parent
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        missing = set(MANIFEST_COLUMNS) - set(reader.fieldnames)
        if missing:
            raise ValidationError(f"manifest {path} lacks columns {sorted(missing)}")
        rows = []
        for row in reader:
            wav = Path(row["wav_path"])
            rows.append((row["clip_id"], str(wav if wav.is_absolute() else base / wav), row["reference_text"]))
    return rows
