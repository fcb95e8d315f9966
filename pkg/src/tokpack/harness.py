"""Experiment harness: corpus runs, p-sweeps, and complexity tables.

Every (sentence, method, p) cell is computed with a fresh provider and
subset cache so its counters are self-contained, and all randomness is
derived from the global seed plus the cell coordinates, making reruns
byte-identical.  Wall-clock times are segregated into timing.csv so the
regression-checked outputs stay deterministic.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ats import DEFAULT_MAX_PACKETS, ErasureModel, exact_ats, single_packet_ats
from .embedding import (
    DEFAULT_DIM,
    MAX_POSITIONS,
    AdditiveProvider,
    EmbeddingProvider,
    EvalCounter,
    FileCacheProvider,
    HashProvider,
    RemoteProvider,
    SubsetCache,
    load_embedding_cache,
)
from .errors import ConfigError
from .model import CorpusSentence, TokenizationMode, load_corpus
from .search import (
    DEFAULT_MAX_GROUPS,
    GBeamConfig,
    full_search,
    full_search_encoding_steps,
    gbeam_encoding_steps,
    gbeam_encoding_steps_total,
    gbeam_search,
    random_pa,
)

logger = logging.getLogger(__name__)

KNOWN_METHODS = ("gbeam", "full", "random", "single_packet")
RESULT_FIELDS = ("sentence_id", "method", "p", "ats", "raw_requests", "cache_misses")
TIDY_FIELDS = ("x", "series", "value")


def derived_seed(*parts: object) -> tuple[int, ...]:
    """Deterministic RNG entropy from mixed seed parts.

    Non-negative ints pass through; everything else is folded in through
    a short blake2s digest, so string sentence ids and float grid values
    derive stable, independent streams.
    """
    entropy: list[int] = []
    for part in parts:
        if isinstance(part, (int, np.integer)) and not isinstance(part, bool) and part >= 0:
            entropy.append(int(part))
        else:
            digest = hashlib.blake2s(repr(part).encode("utf-8"), digest_size=8).digest()
            entropy.append(int.from_bytes(digest[:4], "little"))
            entropy.append(int.from_bytes(digest[4:], "little"))
    return tuple(entropy)


@dataclass(frozen=True)
class ProviderSpec:
    """Parsed provider description: hash | additive | file-cache | remote."""

    kind: str
    options: dict

    @classmethod
    def parse(cls, spec: str) -> "ProviderSpec":
        kind, _, rest = spec.partition(":")
        kind = kind.strip()
        if kind == "hash":
            options = _parse_kv(rest, {"seed": int, "dim": int})
        elif kind == "additive":
            options = _parse_kv(
                rest, {"weights": str, "low": float, "high": float, "dim": int}
            )
            weights = options.get("weights", "random")
            if weights not in ("uniform", "random"):
                raise ConfigError(f"additive weights must be uniform or random, got {weights!r}")
            options["weights"] = weights
        elif kind == "file-cache":
            parts = rest.split(",")
            if not parts[0]:
                raise ConfigError("file-cache provider needs a path: file-cache:PATH")
            options = {"path": parts[0]}
            options.update(_parse_kv(",".join(parts[1:]), {"strict": _parse_bool}))
        elif kind == "remote":
            if not rest:
                raise ConfigError("remote provider needs a URL: remote:http://host:port")
            options = {"url": rest}
        else:
            raise ConfigError(f"unknown provider kind {kind!r}")
        return cls(kind=kind, options=options)


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_kv(rest: str, schema: dict) -> dict:
    options: dict = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep or key not in schema:
            raise ConfigError(f"unknown provider option {item!r}")
        try:
            options[key] = schema[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad provider option {item!r}: {exc}") from exc
    return options


class ProviderFactory:
    """Builds one fresh provider per experiment cell.

    Additive providers are per-sentence (vocabulary and importance
    weights derive from the sentence); hash, file-cache, and remote
    providers are stateless across cells apart from their counters.
    """

    def __init__(self, spec: ProviderSpec, global_seed: int):
        self.spec = spec
        self.global_seed = global_seed
        self._cache_file: tuple[dict, dict] | None = None
        if spec.kind == "file-cache":
            self._cache_file = load_embedding_cache(spec.options["path"])

    def for_sentence(self, sentence: CorpusSentence) -> EmbeddingProvider:
        options = self.spec.options
        if self.spec.kind == "hash":
            seed = options.get("seed", self.global_seed)
            return HashProvider(seed=seed, dim=options.get("dim", DEFAULT_DIM))
        if self.spec.kind == "additive":
            surfaces = list(dict.fromkeys(t.surface for t in sentence.message.tokens))
            dim = options.get("dim", DEFAULT_DIM)
            if options.get("weights", "random") == "uniform":
                weights = None
            else:
                rng = np.random.default_rng(
                    derived_seed(self.global_seed, "additive-weights", sentence.id)
                )
                low = options.get("low", 0.1)
                high = options.get("high", 10.0)
                weights = rng.uniform(low, high, len(surfaces)).tolist()
            return AdditiveProvider(surfaces, weights=weights, dim=dim)
        if self.spec.kind == "file-cache":
            header, entries = self._cache_file
            return FileCacheProvider(
                entries,
                dim=int(header["dim"]),
                model=str(header.get("model", "")),
                strict=options.get("strict", True),
            )
        if self.spec.kind == "remote":
            return RemoteProvider(options["url"])
        raise ConfigError(f"unknown provider kind {self.spec.kind!r}")


@dataclass
class ExperimentConfig:
    """One experiment: corpus x methods x p grid under a global seed."""

    corpus: Path
    seed: int
    m: int = 4
    mode: TokenizationMode = TokenizationMode.WORD
    p_grid: tuple[float, ...] = (0.1, 0.3, 0.5)
    methods: tuple[str, ...] = ("gbeam", "full", "random", "single_packet")
    provider: str = "additive"
    out_dir: Path = Path("results")
    gbeam: GBeamConfig = field(
        default_factory=lambda: GBeamConfig(population=10, beam_width=2, generations=5)
    )
    random_trials: int = 100
    max_sentences: int | None = None
    max_packets: int = DEFAULT_MAX_PACKETS
    max_groups: int = DEFAULT_MAX_GROUPS

    def validate(self) -> None:
        if not self.methods:
            raise ConfigError("at least one method must be selected")
        unknown = [m for m in self.methods if m not in KNOWN_METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {KNOWN_METHODS}")
        if not self.p_grid:
            raise ConfigError("the p grid must be non-empty")
        for p in self.p_grid:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"p grid values must lie in [0, 1], got {p}")
        if self.random_trials < 1:
            raise ConfigError("random_trials must be >= 1")
        if self.m < 1:
            raise ConfigError("packet length m must be >= 1")
        ProviderSpec.parse(self.provider)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with Path(path).open("r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {
            "corpus", "seed", "m", "mode", "p_grid", "methods", "provider",
            "out_dir", "gbeam", "random_trials", "max_sentences",
            "max_packets", "max_groups",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "corpus" not in raw or "seed" not in raw:
            raise ConfigError("config requires at least 'corpus' and 'seed'")
        kwargs = dict(raw)
        kwargs["corpus"] = Path(raw["corpus"])
        kwargs["seed"] = int(raw["seed"])
        if "mode" in raw:
            kwargs["mode"] = TokenizationMode(raw["mode"])
        if "p_grid" in raw:
            kwargs["p_grid"] = tuple(float(p) for p in raw["p_grid"])
        if "methods" in raw:
            kwargs["methods"] = tuple(raw["methods"])
        if "out_dir" in raw:
            kwargs["out_dir"] = Path(raw["out_dir"])
        if "gbeam" in raw:
            kwargs["gbeam"] = GBeamConfig(**raw["gbeam"])
        return cls(**kwargs)


@dataclass(frozen=True)
class ResultRow:
    sentence_id: str
    method: str
    p: float
    ats: float
    raw_requests: int
    cache_misses: int
    wall_time: float


def _run_cell(
    cfg: ExperimentConfig,
    factory: ProviderFactory,
    sentence: CorpusSentence,
    method: str,
    model: ErasureModel,
) -> tuple[float, EvalCounter]:
    msg = sentence.message
    if method == "single_packet":
        return single_packet_ats(msg, model), EvalCounter()
    provider = factory.for_sentence(sentence)
    cache = SubsetCache(msg)
    if method == "full":
        result = full_search(
            msg, cfg.m, model, provider,
            cache=cache, max_groups=cfg.max_groups, max_packets=cfg.max_packets,
        )
        return result.best_ats, result.counters
    if method == "gbeam":
        run_cfg = replace(
            cfg.gbeam, seed=derived_seed(cfg.seed, "gbeam", sentence.id, model.p)
        )
        result = gbeam_search(
            msg, cfg.m, model, provider, run_cfg,
            cache=cache, max_packets=cfg.max_packets,
        )
        return result.best_ats, result.counters
    if method == "random":
        total = 0.0
        for trial in range(cfg.random_trials):
            group = random_pa(
                msg, cfg.m, derived_seed(cfg.seed, "random", sentence.id, model.p, trial)
            )
            total += exact_ats(group, model, cache, provider, cfg.max_packets).ats
        return total / cfg.random_trials, provider.counter.snapshot()
    raise ConfigError(f"unknown method {method!r}")


def usable_sentences(cfg: ExperimentConfig) -> list[CorpusSentence]:
    """Corpus sentences compatible with the configured packetization."""
    sentences = load_corpus(cfg.corpus, cfg.mode)
    if cfg.max_sentences is not None:
        sentences = sentences[: cfg.max_sentences]
    kept: list[CorpusSentence] = []
    for sentence in sentences:
        k = len(sentence.message)
        if k % cfg.m != 0:
            logger.warning(
                "skipping sentence %s: K=%d is not divisible by M=%d", sentence.id, k, cfg.m
            )
            continue
        if k > MAX_POSITIONS:
            logger.warning(
                "skipping sentence %s: K=%d exceeds the %d-position limit",
                sentence.id, k, MAX_POSITIONS,
            )
            continue
        if k // cfg.m > cfg.max_packets:
            logger.warning(
                "skipping sentence %s: N=%d exceeds the enumeration guard %d",
                sentence.id, k // cfg.m, cfg.max_packets,
            )
            continue
        kept.append(sentence)
    return kept


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> list[ResultRow]:
    """Produce one ResultRow per sentence x method x p; optionally write files."""
    cfg.validate()
    sentences = usable_sentences(cfg)
    logger.info(
        "corpus %s: %d usable sentences at M=%d", cfg.corpus, len(sentences), cfg.m
    )
    factory = ProviderFactory(ProviderSpec.parse(cfg.provider), cfg.seed)
    rows: list[ResultRow] = []
    for sentence in sentences:
        for method in dict.fromkeys(cfg.methods):
            for p in cfg.p_grid:
                start = time.perf_counter()
                ats, counter = _run_cell(cfg, factory, sentence, method, ErasureModel(p))
                rows.append(
                    ResultRow(
                        sentence_id=sentence.id,
                        method=method,
                        p=p,
                        ats=ats,
                        raw_requests=counter.raw_requests,
                        cache_misses=counter.cache_misses,
                        wall_time=time.perf_counter() - start,
                    )
                )
    _log_method_means(rows)
    _check_aggregate_ordering(rows)
    if write:
        write_results(rows, cfg.out_dir)
    return rows


def _log_method_means(rows: Sequence[ResultRow]) -> None:
    for method in dict.fromkeys(r.method for r in rows):
        scores = [r.ats for r in rows if r.method == method]
        logger.info("method %-13s mean ats %.4f over %d rows", method, np.mean(scores), len(scores))


def _check_aggregate_ordering(rows: Sequence[ResultRow]) -> None:
    # Sanity: the full-search optimum bounds gbeam, which should beat random.
    by_p: dict[float, dict[str, list[float]]] = {}
    for row in rows:
        by_p.setdefault(row.p, {}).setdefault(row.method, []).append(row.ats)
    for p, methods in sorted(by_p.items()):
        means = {m: float(np.mean(v)) for m, v in methods.items()}
        if {"full", "gbeam"} <= means.keys() and means["full"] < means["gbeam"] - 1e-9:
            logger.warning("ordering violated at p=%s: full %.6f < gbeam %.6f", p, means["full"], means["gbeam"])
        if {"gbeam", "random"} <= means.keys() and means["gbeam"] < means["random"] - 1e-9:
            logger.warning("ordering violated at p=%s: gbeam %.6f < random %.6f", p, means["gbeam"], means["random"])


def write_results(rows: Sequence[ResultRow], out_dir: str | Path) -> dict[str, Path]:
    """Write results.csv, results.jsonl (deterministic) and timing.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": out_dir / "results.csv",
        "jsonl": out_dir / "results.jsonl",
        "timing": out_dir / "timing.csv",
    }
    with paths["csv"].open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_FIELDS)
        for row in rows:
            writer.writerow(
                [row.sentence_id, row.method, row.p, row.ats, row.raw_requests, row.cache_misses]
            )
    with paths["jsonl"].open("w", encoding="utf-8") as fh:
        for row in rows:
            record = {f: getattr(row, f) for f in RESULT_FIELDS}
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    with paths["timing"].open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("sentence_id", "method", "p", "wall_time_s"))
        for row in rows:
            writer.writerow([row.sentence_id, row.method, row.p, f"{row.wall_time:.6f}"])
    return paths


def p_sweep_table(rows: Sequence[ResultRow]) -> list[dict]:
    """Tidy (x=p, series=method, value=mean ats) aggregation of a run."""
    if not rows:
        raise ConfigError("cannot aggregate an empty result table")
    by_key: dict[tuple[float, str], list[float]] = {}
    for row in rows:
        by_key.setdefault((row.p, row.method), []).append(row.ats)
    return [
        {"x": p, "series": method, "value": float(np.mean(vals))}
        for (p, method), vals in sorted(by_key.items())
    ]


def complexity_k_table(
    k_values: Sequence[int], m: int, generations: int, population: int
) -> list[dict]:
    """Encoding-step formulas as K grows at fixed M, plus their ratio."""
    table: list[dict] = []
    for k in k_values:
        if k % m != 0:
            logger.warning("skipping K=%d: not divisible by M=%d", k, m)
            continue
        n = k // m
        full = full_search_encoding_steps(k)
        beam = gbeam_encoding_steps(generations, population, n)
        table.append({"x": k, "series": "full_search", "value": full})
        table.append({"x": k, "series": "gbeam", "value": beam})
        table.append(
            {"x": k, "series": "gbeam_with_init",
             "value": gbeam_encoding_steps_total(generations, population, n)}
        )
        table.append({"x": k, "series": "ratio", "value": full / beam})
    if not table:
        raise ConfigError("no usable K values in the sweep")
    return table


def complexity_m_table(
    k: int, m_values: Sequence[int], generations: int, population: int
) -> list[dict]:
    """Encoding-step formulas as M grows at fixed K, plus their ratio."""
    table: list[dict] = []
    for m in m_values:
        if m < 1 or k % m != 0:
            logger.warning("skipping M=%d: does not divide K=%d", m, k)
            continue
        n = k // m
        full = full_search_encoding_steps(k)
        beam = gbeam_encoding_steps(generations, population, n)
        table.append({"x": m, "series": "full_search", "value": full})
        table.append({"x": m, "series": "gbeam", "value": beam})
        table.append(
            {"x": m, "series": "gbeam_with_init",
             "value": gbeam_encoding_steps_total(generations, population, n)}
        )
        table.append({"x": m, "series": "ratio", "value": full / beam})
    if not table:
        raise ConfigError("no usable M values in the sweep")
    return table


def write_tidy_csv(table: Iterable[dict], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TIDY_FIELDS)
        writer.writeheader()
        for row in table:
            writer.writerow(row)
    return path


def inspect_sentence(
    cfg: ExperimentConfig, sentence_id: str, p: float, samples: int = 3
) -> str:
    """Human-readable report: best grouping plus sampled received texts."""
    matches = [s for s in usable_sentences(cfg) if s.id == sentence_id]
    if not matches:
        raise ConfigError(f"sentence {sentence_id!r} not found or not usable at M={cfg.m}")
    sentence = matches[0]
    msg = sentence.message
    model = ErasureModel(p)
    factory = ProviderFactory(ProviderSpec.parse(cfg.provider), cfg.seed)
    provider = factory.for_sentence(sentence)
    cache = SubsetCache(msg)
    run_cfg = replace(cfg.gbeam, seed=derived_seed(cfg.seed, "gbeam", sentence.id, p))
    result = gbeam_search(
        msg, cfg.m, model, provider, run_cfg, cache=cache, max_packets=cfg.max_packets
    )
    lines = [
        f"sentence {sentence.id}: {msg.text()}",
        f"K={len(msg)} M={cfg.m} N={len(msg) // cfg.m} p={p}",
        f"beam-search ats: {result.best_ats:.6f} "
        f"({result.evaluated_groups} groups evaluated)",
        "best grouping:",
    ]
    for idx, packet in enumerate(result.best_group.packets):
        members = sorted(packet.member_positions)
        words = " ".join(msg.tokens[pos].surface for pos in members)
        lines.append(f"  packet {idx}: positions {members} -> [{words}]")
    lines.append("sample receptions:")
    from .channel import sample_received_text

    for i in range(samples):
        text = sample_received_text(
            result.best_group, model, derived_seed(cfg.seed, "inspect", sentence.id, p, i)
        )
        lines.append(f"  draw {i}: {text!r}")
    return "\n".join(lines)


def emit_plot_data(
    rows: Sequence[ResultRow],
    kind: str,
    path: str | Path,
    *,
    k_values: Sequence[int] | None = None,
    m_values: Sequence[int] | None = None,
    k: int | None = None,
    m: int | None = None,
    generations: int = 5,
    population: int = 10,
) -> Path:
    """Write one tidy CSV (columns x, series, value) for external plotting."""
    if kind == "p_sweep":
        table = p_sweep_table(rows)
    elif kind == "complexity_K":
        if k_values is None or m is None:
            raise ConfigError("complexity_K needs k_values and m")
        table = complexity_k_table(k_values, m, generations, population)
    elif kind == "complexity_M":
        if k is None or m_values is None:
            raise ConfigError("complexity_M needs k and m_values")
        table = complexity_m_table(k, m_values, generations, population)
    else:
        raise ConfigError(f"unknown plot kind {kind!r}")
    return write_tidy_csv(table, path)
