"""Monte Carlo campaigns: BLER/complexity sweeps, structure census, OD study."""
from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache

import numpy as np
from scipy.stats import binomtest

from . import error_model as em
from .binary_code import BitWord, SystematicCode, encode_many, generate_rlc
from .grand_decoders import (DECODERS, DecodeOutcome, bit_level_grand, sorted_bit_level_grand,
                             sorted_symbol_level_grand, symbol_level_grand)
from .mimo_channel import (SingularChannelError, ZfDetector, complex_normal, orthogonality_defect,
                           pch_scale, pch_transmit, real_lattice_basis, sample_channel, transmit,
                           zf_detect)
from .modulation import build_gray_qam, error_type_table, quantize_many

UNCODED = "uncoded"
MAX_RESAMPLES = 16

SIMULATE_COLUMNS = ("decoder", "eb_n0_db", "trials", "block_errors", "bler", "bler_ci_lo",
                    "bler_ci_hi", "avg_queries", "query_std", "abandon_rate")
CENSUS_COLUMNS = ("eb_n0_db", "l1", "l2", "predicted_p", "measured_p", "stderr")
OD_COLUMNS = ("n_t", "n_r", "samples", "od_mean", "od_std")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    k: int = 26
    n: int = 32
    M: int = 16
    n_r: int = 25
    eb_n0_grid_db: tuple[float, ...] = (4.0, 5.0, 6.0, 7.0, 8.0, 9.0)
    w_th: int = 3
    decoders: tuple[str, ...] = DECODERS
    trials_per_point: int = 1_000_000
    target_block_errors: int = 100
    master_seed: int = 1
    code_seed: int = 7
    pch: bool = False
    array_gain: bool = False
    noise: bool = True
    batch_size: int = 500
    # "stream": index ranking tables by the mean per-stream SNR after ZF;
    # "ergodic": by the plain transmit snr
    ranking_snr: str = "stream"

    def __post_init__(self):
        object.__setattr__(self, "eb_n0_grid_db", tuple(float(x) for x in self.eb_n0_grid_db))
        object.__setattr__(self, "decoders", tuple(self.decoders))
        m = int(round(math.log2(self.M)))
        if self.n % m:
            raise ConfigError(f"n={self.n} is not a multiple of log2(M)={m}")
        if self.n_r < self.n_t:
            raise ConfigError(f"N_R={self.n_r} smaller than N_T={self.n_t}")
        unknown = set(self.decoders) - set(DECODERS) - {UNCODED}
        if unknown:
            raise ConfigError(f"unknown decoders: {sorted(unknown)}")
        if self.ranking_snr not in ("stream", "ergodic"):
            raise ConfigError(f"ranking_snr must be 'stream' or 'ergodic', got {self.ranking_snr!r}")
        if self.w_th < 1 or self.trials_per_point < 1 or self.batch_size < 1:
            raise ConfigError("w_th, trials_per_point and batch_size must be positive")

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.M)))

    @property
    def n_t(self) -> int:
        return self.n // self.bits_per_symbol

    def snr(self, eb_n0_db: float) -> float:
        return em.ebn0_to_snr(eb_n0_db, self.M, self.k, self.n)

    def stream_snr(self, eb_n0_db: float) -> float:
        """SNR used to pick the structure ranking at this grid point."""
        snr = self.snr(eb_n0_db)
        if self.ranking_snr == "ergodic":
            return snr
        if self.pch:
            return snr * self.n_r / self.n_t if self.array_gain else snr
        # E[1/[G^-1]_ii] = N_R - N_T + 1 for i.i.d. CN(0,1) entries
        return snr * (self.n_r - self.n_t + 1) / self.n_t

    @classmethod
    def from_mapping(cls, data: dict) -> SimConfig:
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> SimConfig:
        with open(path) as fh:
            return cls.from_mapping(json.load(fh))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


@dataclass
class PointStats:
    decoder: str
    eb_n0_db: float
    trials: int = 0
    block_errors: int = 0
    abandoned: int = 0
    query_sum: int = 0
    query_sq_sum: int = 0

    def add(self, error: bool, queries: int, abandoned: bool):
        self.trials += 1
        self.block_errors += bool(error)
        self.abandoned += bool(abandoned)
        self.query_sum += queries
        self.query_sq_sum += queries * queries

    @property
    def bler(self) -> float:
        return self.block_errors / self.trials

    @property
    def bler_ci(self) -> tuple[float, float]:
        ci = binomtest(self.block_errors, self.trials).proportion_ci(0.95, method="wilson")
        return ci.low, ci.high

    @property
    def avg_queries(self) -> float:
        return self.query_sum / self.trials

    @property
    def query_std(self) -> float:
        mean = self.avg_queries
        return math.sqrt(max(self.query_sq_sum / self.trials - mean * mean, 0.0))

    @property
    def abandon_rate(self) -> float:
        return self.abandoned / self.trials

    def row(self) -> dict:
        lo, hi = self.bler_ci
        return {"decoder": self.decoder, "eb_n0_db": f"{self.eb_n0_db:g}", "trials": self.trials,
                "block_errors": self.block_errors, "bler": f"{self.bler:.6e}",
                "bler_ci_lo": f"{lo:.6e}", "bler_ci_hi": f"{hi:.6e}",
                "avg_queries": f"{self.avg_queries:.6f}", "query_std": f"{self.query_std:.6f}",
                "abandon_rate": f"{self.abandon_rate:.6e}"}


@dataclass
class CampaignResult:
    config: SimConfig
    points: list[PointStats] = field(default_factory=list)
    resampled_channels: int = 0
    # per (eb_n0_db, decoder): 0/1 block-error flags by trial, kept when requested
    per_trial: dict = field(default_factory=dict)

    def get(self, decoder: str, eb_n0_db: float) -> PointStats:
        for p in self.points:
            if p.decoder == decoder and p.eb_n0_db == eb_n0_db:
                return p
        raise KeyError((decoder, eb_n0_db))

    def to_csv(self) -> str:
        return _csv(SIMULATE_COLUMNS, [p.row() for p in self.points])


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


@lru_cache(maxsize=8)
def _code(k: int, n: int, seed: int) -> SystematicCode:
    return generate_rlc(k, n, seed)


@lru_cache(maxsize=64)
def _ranking(L: int, M: int, snr: float, w_th: int) -> em.StructureRanking:
    return em.rank_structures(L, M, snr, w_th)


def trial_rng(master_seed: int, trial_index: int, attempt: int = 0) -> np.random.Generator:
    key = [master_seed, trial_index] + ([attempt] if attempt else [])
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def _receive(cfg: SimConfig, x: np.ndarray, snr: float, master_seed: int, trial_index: int):
    """Detected labels and per-stream gains for one channel use."""
    c = build_gray_qam(cfg.M)
    for attempt in range(MAX_RESAMPLES):
        rng = trial_rng(master_seed, trial_index, attempt)
        rng.integers(0, 2, cfg.k)  # the message was drawn from this stream first
        if cfg.pch:
            z = pch_transmit(cfg.n_t, cfg.n_r, x, snr, cfg.array_gain, rng)
            if not cfg.noise:
                z = pch_scale(cfg.n_t, snr, cfg.array_gain) * x
            gains = np.full(cfg.n_t, float(cfg.n_r) if cfg.array_gain else 1.0)
            return quantize_many(c, z, pch_scale(cfg.n_t, snr, cfg.array_gain)), gains, attempt
        ch = sample_channel(cfg.n_t, cfg.n_r, rng)
        try:
            det = ZfDetector.from_channel(ch)
        except SingularChannelError:
            continue
        y = transmit(ch, x, snr, rng, noise=cfg.noise)
        return quantize_many(c, zf_detect(det, y), math.sqrt(snr / cfg.n_t)), det.gains, attempt
    raise SingularChannelError(f"trial {trial_index}: no usable channel after {MAX_RESAMPLES} draws")


def run_trial(cfg: SimConfig, trial_index: int, eb_n0_db: float) -> dict:
    """One paired pipeline run: every enabled decoder sees the same received word.

    Returns ``{decoder: (block_error, queries, abandoned)}`` plus ``"_resampled"``.
    """
    code = _code(cfg.k, cfg.n, cfg.code_seed)
    c = build_gray_qam(cfg.M)
    m, L = cfg.bits_per_symbol, cfg.n_t
    snr = cfg.snr(eb_n0_db)

    rng = trial_rng(cfg.master_seed, trial_index)
    a = rng.integers(0, 2, cfg.k).astype(np.uint8)
    cw = encode_many(code, a)
    tx_labels = cw.reshape(L, m) @ (1 << np.arange(m - 1, -1, -1))
    rx_labels, gains, attempts = _receive(cfg, c.coords[tx_labels], snr, cfg.master_seed, trial_index)

    a_word = BitWord.from_bits(a)
    y_val = 0
    for v in rx_labels:
        y_val = (y_val << m) | int(v)
    y_b = BitWord(y_val, cfg.n)

    out = {"_resampled": attempts}
    ranking = None
    for name in cfg.decoders:
        if name == UNCODED:
            out[name] = (y_b.slice(0, cfg.k) != a_word, 0, False)
            continue
        if name == "bit":
            res = bit_level_grand(y_b, code, cfg.w_th)
        elif name == "bit-sorted":
            res = sorted_bit_level_grand(y_b, code, cfg.w_th, gains, c)
        else:
            if ranking is None:
                ranking = _ranking(L, cfg.M, cfg.stream_snr(eb_n0_db), cfg.w_th)
            if name == "symbol":
                res = symbol_level_grand(rx_labels, code, c, ranking)
            else:
                res = sorted_symbol_level_grand(rx_labels, code, c, ranking, gains)
        out[name] = (_is_block_error(res, a_word), res.queries, res.abandoned)
    return out


def _is_block_error(res: DecodeOutcome, a: BitWord) -> bool:
    return res.abandoned or res.info_bits != a


def _run_batch(args) -> list[dict]:
    cfg, eb_n0_db, start, stop = args
    return [run_trial(cfg, t, eb_n0_db) for t in range(start, stop)]


def run_campaign(cfg: SimConfig, workers: int = 1, keep_trials: bool = False) -> CampaignResult:
    """Sweep the Eb/N0 grid with a deterministic batch-wise stopping rule.

    Trials are dealt out in fixed batches and the stop test runs only between
    batches, so results do not depend on ``workers``.
    """
    result = CampaignResult(config=cfg)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for eb in cfg.eb_n0_grid_db:
            stats = {d: PointStats(d, eb) for d in cfg.decoders}
            flags = {d: [] for d in cfg.decoders}
            coded = [d for d in cfg.decoders if d != UNCODED] or list(cfg.decoders)
            done = 0
            while done < cfg.trials_per_point:
                stop = min(done + cfg.batch_size, cfg.trials_per_point)
                if pool is None:
                    outcomes = _run_batch((cfg, eb, done, stop))
                else:
                    edges = np.linspace(done, stop, workers + 1).astype(int)
                    jobs = [(cfg, eb, int(lo), int(hi)) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]
                    outcomes = [o for part in pool.map(_run_batch, jobs) for o in part]
                for o in outcomes:
                    result.resampled_channels += o["_resampled"]
                    for d in cfg.decoders:
                        err, q, ab = o[d]
                        stats[d].add(err, q, ab)
                        if keep_trials:
                            flags[d].append(err)
                done = stop
                if min(stats[d].block_errors for d in coded) >= cfg.target_block_errors:
                    break
            result.points.extend(stats.values())
            if keep_trials:
                for d in cfg.decoders:
                    result.per_trial[(eb, d)] = np.array(flags[d], dtype=bool)
    finally:
        if pool is not None:
            pool.shutdown()
    return result


@dataclass
class CensusPoint:
    eb_n0_db: float
    codewords: int
    counts: Counter
    other: int
    predicted: dict

    def measured(self, l1: int, l2: int) -> float:
        return self.counts.get((l1, l2), 0) / self.codewords

    def stderr(self, l1: int, l2: int) -> float:
        p = self.predicted.get((l1, l2), 0.0)
        return math.sqrt(p * (1 - p) / self.codewords)

    def predicted_top(self, n: int) -> list[tuple[int, int]]:
        return [s for s, _ in sorted(self.predicted.items(), key=lambda e: (-e[1], e[0][0] + 2 * e[0][1], e[0][1]))][:n]

    def measured_top(self, n: int) -> list[tuple[int, int]]:
        return [s for s, _ in sorted(self.counts.items(), key=lambda e: (-e[1], e[0][0] + 2 * e[0][1], e[0][1]))][:n]


def run_structure_census(cfg: SimConfig, codewords: int, batch: int = 20_000) -> list[CensusPoint]:
    """Tally the [L1 L2] structure of every received word on the PCH channel.

    Uses the per-stream SNR convention of the probability model (no array
    gain). Words containing an error outside the two neighborhoods are counted
    in ``other`` and in no structure.
    """
    code = _code(cfg.k, cfg.n, cfg.code_seed)
    c = build_gray_qam(cfg.M)
    types = error_type_table(c)
    m, L = cfg.bits_per_symbol, cfg.n_t
    weights = 1 << np.arange(m - 1, -1, -1)
    points = []
    for idx, eb in enumerate(cfg.eb_n0_grid_db):
        snr = cfg.snr(eb)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.master_seed, idx])))
        counts: Counter = Counter()
        other = 0
        done = 0
        while done < codewords:
            b = min(batch, codewords - done)
            msgs = rng.integers(0, 2, (b, cfg.k), dtype=np.uint8)
            tx = encode_many(code, msgs).reshape(b, L, m) @ weights
            z = pch_transmit(L, cfg.n_r, c.coords[tx], snr, False, rng)
            if not cfg.noise:
                z = pch_scale(L, snr, False) * c.coords[tx]
            rx = quantize_many(c, z, pch_scale(L, snr, False))
            t = types[rx, tx]
            n1 = (t == 1).sum(axis=1)
            n2 = (t == 2).sum(axis=1)
            bad = (t == 3).any(axis=1)
            other += int(bad.sum())
            keys = n1[~bad] * (L + 1) + n2[~bad]
            for key, cnt in zip(*np.unique(keys, return_counts=True)):
                counts[(int(key) // (L + 1), int(key) % (L + 1))] += int(cnt)
            done += b
        probs = em.symbol_error_probs(cfg.M, snr)
        predicted = {}
        for l1 in range(L + 1):
            for l2 in range(L + 1 - l1):
                p = em.structure_probability_closed(L, l1, l2, probs)
                if p >= 1e-9 or (l1, l2) in counts:
                    predicted[(l1, l2)] = em.structure_probability(L, l1, l2, probs)
        points.append(CensusPoint(eb, codewords, counts, other, predicted))
    return points


def census_csv(points: list[CensusPoint]) -> str:
    rows = []
    for pt in points:
        for l1, l2 in sorted(pt.predicted, key=lambda s: (-pt.predicted[s], s)):
            rows.append({"eb_n0_db": f"{pt.eb_n0_db:g}", "l1": l1, "l2": l2,
                         "predicted_p": f"{pt.predicted[(l1, l2)]:.6e}",
                         "measured_p": f"{pt.measured(l1, l2):.6e}",
                         "stderr": f"{pt.stderr(l1, l2):.6e}"})
    return _csv(CENSUS_COLUMNS, rows)


def od_samples(n_t: int, n_r: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    H = complex_normal(rng, (samples, n_r, n_t))
    B = np.concatenate([np.concatenate([H.real, -H.imag], axis=2),
                        np.concatenate([H.imag, H.real], axis=2)], axis=1)
    _, logdet = np.linalg.slogdet(np.swapaxes(B, 1, 2) @ B)
    log_norms = np.log(np.linalg.norm(B, axis=1)).sum(axis=1)
    return np.exp(log_norms - 0.5 * logdet)


def run_od_study(n_t_list, n_r_list, samples: int, master_seed: int) -> list[dict]:
    if min(n_r_list) < max(n_t_list):
        raise ConfigError("every N_R must be at least max(N_T)")
    rows = []
    for n_t in n_t_list:
        for n_r in n_r_list:
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([master_seed, n_t, n_r])))
            od = od_samples(n_t, n_r, samples, rng)
            rows.append({"n_t": n_t, "n_r": n_r, "samples": samples,
                         "od_mean": float(od.mean()), "od_std": float(od.std(ddof=1)),
                         "od_min": float(od.min())})
    return rows


def od_csv(rows) -> str:
    return _csv(OD_COLUMNS, [{k: (f"{v:.6f}" if isinstance(v, float) else v)
                              for k, v in r.items() if k in OD_COLUMNS} for r in rows])


def orthogonality_defect_of(H: np.ndarray) -> float:
    """Convenience wrapper for a single complex channel matrix."""
    return orthogonality_defect(real_lattice_basis(H))
