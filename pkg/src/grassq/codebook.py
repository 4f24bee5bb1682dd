"""Finite codes on G(n, p): quantization, distortion, max-min design, persistence."""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field as dc_field, replace
from typing import Sequence

import numpy as np

from ._random import RandomLike, as_generator, as_seed_sequence, map_chunks, mean_and_stderr
from .core import (
    ORTHONORMAL_TOL,
    ArgumentError,
    FieldTag,
    ShapeError,
    Subspace,
    _gaussian,
    chordal_distance,
    check_dimensions,
    haar_bases,
    orthonormality_defect,
    orthonormalize,
    squared_distance_table,
    squared_distances,
)

# Upper bound on complex entries of one (queries x codewords) cross-product block.
_BLOCK_ENTRIES = 1 << 21

FILE_MAGIC = "GRASSQ-CB v1"


@dataclass
class CodebookMeta:
    designer: str = "unknown"
    seed: int = 0
    mindist: float = float("nan")
    iterations: int | None = None
    # True when the designer returned its random initialization unrefined.
    init_only: bool = False


class Codebook:
    """Ordered list of K points sharing one manifold G(n, p) over ``field``."""

    def __init__(self, bases, field: FieldTag | str = FieldTag.COMPLEX, meta: CodebookMeta | None = None,
                 check: bool = True):
        f = FieldTag.parse(field)
        b = np.array(bases, dtype=f.dtype if f is FieldTag.COMPLEX else None)
        if f is FieldTag.REAL:
            if np.iscomplexobj(b):
                raise ArgumentError("complex codewords in a real codebook")
            b = b.astype(np.float64)
        if b.ndim != 3 or b.shape[0] < 1:
            raise ShapeError(f"codebook needs a (K, n, p) stack with K >= 1, got shape {b.shape}")
        check_dimensions(b.shape[1], b.shape[2])
        if check:
            for k in range(b.shape[0]):
                defect = orthonormality_defect(b[k])
                if defect > ORTHONORMAL_TOL:
                    raise ArgumentError(f"codeword {k} is not orthonormal (defect {defect:.3g})")
        b.setflags(write=False)
        self.bases = b
        self.field = f
        self.meta = meta if meta is not None else CodebookMeta()
        if math.isnan(self.meta.mindist):
            self.meta.mindist = self.min_distance()

    @classmethod
    def from_subspaces(cls, entries: Sequence[Subspace], meta: CodebookMeta | None = None) -> "Codebook":
        if not entries:
            raise ShapeError("empty codebook")
        key = entries[0].shape_key
        for k, e in enumerate(entries):
            if e.shape_key != key:
                raise ShapeError(f"entry {k} lives on a different manifold than entry 0")
        return cls(np.stack([e.basis for e in entries]), key[2], meta)

    @property
    def K(self) -> int:
        return self.bases.shape[0]

    @property
    def n(self) -> int:
        return self.bases.shape[1]

    @property
    def p(self) -> int:
        return self.bases.shape[2]

    @property
    def shape_key(self) -> tuple[int, int, FieldTag]:
        return (self.n, self.p, self.field)

    def __len__(self) -> int:
        return self.K

    def __getitem__(self, k: int) -> Subspace:
        return Subspace(self.bases[k], self.field)

    @property
    def entries(self) -> list[Subspace]:
        return [self[k] for k in range(self.K)]

    def subset(self, indices) -> "Codebook":
        meta = replace(self.meta, mindist=float("nan"))
        return Codebook(self.bases[np.asarray(indices)], self.field, meta, check=False)

    def rotated(self, A: np.ndarray) -> "Codebook":
        """Apply one n x n unitary to every codeword."""
        image = orthonormalize(np.asarray(A) @ self.bases)
        if self.field is FieldTag.REAL:
            image = image.real
        return Codebook(image, self.field, replace(self.meta), check=True)

    def min_distance(self) -> float:
        """Minimum pairwise chordal distance (inf for a single codeword)."""
        if self.K == 1:
            return float("inf")
        best, pair = np.inf, (0, 1)
        for start, stop in _blocks(self.K, self.K * self.p * self.p):
            table = squared_distance_table(self.bases[start:stop], self.bases)
            rows = np.arange(stop - start)
            table[rows, rows + start] = np.inf
            k = int(np.argmin(table))
            if table.flat[k] < best:
                best = table.flat[k]
                i, j = divmod(k, self.K)
                pair = (i + start, j)
        # Re-evaluate the closest pair without cancellation.
        return chordal_distance(self[pair[0]], self[pair[1]])

    def allclose(self, other: "Codebook", atol: float = 1e-12) -> bool:
        return (
            self.shape_key == other.shape_key
            and self.K == other.K
            and bool(np.max(np.abs(self.bases - other.bases)) <= atol)
        )

    def __repr__(self) -> str:
        return (f"Codebook(K={self.K}, n={self.n}, p={self.p}, field={self.field.value}, "
                f"designer={self.meta.designer!r}, mindist={self.meta.mindist:.6g})")


@dataclass(frozen=True)
class DistortionReport:
    mean: float
    std_error: float
    samples: int
    K: int


@dataclass(frozen=True)
class RandomCodeTrial:
    """Random-code ensemble summary.

    ``w`` holds, per trial (row), the nearest squared distance from each
    Haar query to that trial's random code.
    """

    K: int
    t: int
    w: np.ndarray = dc_field(repr=False)
    scaled_mean: float = 0.0
    std_error: float = 0.0

    @property
    def trials(self) -> int:
        return self.w.shape[0]

    @property
    def mean_w(self) -> float:
        return float(self.w.mean())


def _blocks(total: int, per_row: int):
    step = max(1, _BLOCK_ENTRIES // max(per_row, 1))
    for start in range(0, total, step):
        yield start, min(total, start + step)


def _check_query(C: Codebook, key) -> None:
    if key != C.shape_key:
        n, p, f = key
        raise ShapeError(
            f"query on G({n},{p}) over {f.value} does not match codebook on "
            f"G({C.n},{C.p}) over {C.field.value}"
        )


def quantize_bases(C: Codebook, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest codeword index and squared chordal distance for a stack of query bases.

    Ties resolve to the lowest index.
    """
    queries = np.asarray(queries)
    if queries.ndim == 2:
        queries = queries[None]
    if queries.shape[1:] != (C.n, C.p):
        raise ShapeError(f"queries of shape {queries.shape[1:]} do not match codebook ({C.n}, {C.p})")
    S = queries.shape[0]
    idx = np.empty(S, dtype=np.int64)
    d2 = np.empty(S)
    for start, stop in _blocks(S, C.K * C.p * C.p):
        table = squared_distance_table(queries[start:stop], C.bases)
        k = np.argmin(table, axis=1)
        idx[start:stop] = k
        d2[start:stop] = table[np.arange(stop - start), k]
    return idx, d2


def quantize(C: Codebook, Q: Subspace) -> tuple[int, float]:
    """Index of the codeword closest to Q and the squared chordal distance to it."""
    _check_query(C, Q.shape_key)
    idx, _ = quantize_bases(C, Q.basis)
    k = int(idx[0])
    return k, chordal_distance(C[k], Q) ** 2


def mean_distortion(C: Codebook, samples: int = 10**5, rng: RandomLike = 0, workers: int = 1) -> DistortionReport:
    """Monte Carlo estimate of E_Q[min_P d_c^2(P, Q)] for Haar-uniform Q."""
    if samples < 10**3:
        raise ArgumentError(f"need at least 10^3 samples, got {samples}")

    def chunk(size, gen):
        return quantize_bases(C, haar_bases(C.n, C.p, C.field, size, gen))[1]

    mean, se, count = mean_and_stderr(map_chunks(chunk, samples, rng, workers))
    return DistortionReport(mean, se, count, C.K)


def _seed_of(rng: RandomLike) -> int:
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    if isinstance(rng, np.random.SeedSequence):
        entropy = rng.entropy
        if isinstance(entropy, (list, tuple, np.ndarray)) and len(entropy):
            entropy = entropy[0]
        if isinstance(entropy, (int, np.integer)):
            return int(entropy) % 2**64
    return 0


def random_codebook(n: int, p: int, field: FieldTag | str, K: int, rng: RandomLike = 0) -> Codebook:
    """K i.i.d. Haar-uniform codewords."""
    f = FieldTag.parse(field)
    meta = CodebookMeta(designer="random", seed=_seed_of(rng), iterations=0)
    return Codebook(haar_bases(n, p, f, K, rng), f, meta, check=False)


def _nearest(bases: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    K, n, p = bases.shape
    nn_d2 = np.empty(K)
    nn_idx = np.empty(K, dtype=np.int64)
    for start, stop in _blocks(K, K * p * p):
        table = squared_distance_table(bases[start:stop], bases)
        rows = np.arange(stop - start)
        table[rows, rows + start] = np.inf
        nn_idx[start:stop] = np.argmin(table, axis=1)
        nn_d2[start:stop] = table[rows, nn_idx[start:stop]]
    return nn_d2, nn_idx


def _tangent(U: np.ndarray, Z: np.ndarray) -> np.ndarray:
    return Z - U @ (U.conj().T @ Z)


def design_maxmin(
    n: int,
    p: int,
    field: FieldTag | str,
    K: int,
    iterations: int = 5000,
    restarts: int = 16,
    rng: RandomLike = 0,
) -> Codebook:
    """Max-min packing of K points on G(n, p).

    Keeps the best of ``restarts`` random codes, then repeatedly moves one
    member of the currently closest pair. The move follows the ascent
    direction of a soft-min of its distances to nearby codewords, plus a small
    random tangent component, and is accepted only if that member's
    nearest-neighbour distance grows. The global minimum distance is
    therefore nondecreasing. The step size adapts to the acceptance rate, and
    the search stops early once the step collapses.

    With ``iterations=0`` the best random initialization is returned and
    ``meta.init_only`` is set.
    """
    check_dimensions(n, p)
    f = FieldTag.parse(field)
    if int(K) != K or K < 2:
        raise ArgumentError(f"max-min design needs K >= 2, got {K}")
    if restarts < 1 or iterations < 0:
        raise ArgumentError("restarts must be >= 1 and iterations >= 0")
    seed = _seed_of(rng)
    gen = np.random.default_rng(as_seed_sequence(rng))

    best = None
    for _ in range(restarts):
        cand = orthonormalize(_gaussian((K, n, p), f, gen))
        nn_d2, nn_idx = _nearest(cand)
        if best is None or nn_d2.min() > best[1].min():
            best = (cand, nn_d2, nn_idx)
    bases, nn_d2, nn_idx = best
    bases = bases.copy()

    step = 0.5 * math.sqrt(nn_d2.min())
    min_step = 1e-9
    done = 0
    for it in range(iterations):
        if step < min_step:
            break
        done = it + 1
        i = int(np.argmin(nn_d2))
        pair = (i, int(nn_idx[i])) if it % 2 == 0 else (int(nn_idx[i]), i)
        moved = False
        for m in pair:
            U = bases[m]
            row = squared_distances(U, bases)
            row[m] = np.inf
            d2_min = row.min()
            # Soft-min weights over codewords that could become nearest after a step.
            tau = max(2.0 * step * math.sqrt(d2_min), 1e-12)
            w = np.exp(-(row - d2_min) / tau)
            w[m] = 0.0
            overlap = np.swapaxes(bases.conj(), 1, 2) @ U
            pull = np.einsum("kia,kab->ib", bases * w[:, None, None], overlap)
            direction = _tangent(U, pull)  # descent of sum w_j ||U_j^H U||^2 is -direction
            norm = np.linalg.norm(direction)
            noise = _tangent(U, _gaussian((n, p), f, gen))
            noise /= max(np.linalg.norm(noise), 1e-300)
            move = -direction / norm if norm > 1e-14 else noise
            cand = orthonormalize(U + step * (move + 0.25 * noise))
            if f is FieldTag.REAL:
                cand = cand.real
            new_row = squared_distances(cand, bases)
            new_row[m] = np.inf
            if new_row.min() > d2_min:
                bases[m] = cand
                _update_neighbours(bases, nn_d2, nn_idx, m, new_row)
                moved = True
                break
        step = step * 1.2 if moved else step * 0.7

    meta = CodebookMeta(designer="maxmin", seed=seed, iterations=done, init_only=(iterations == 0))
    return Codebook(bases, f, meta, check=True)


def _update_neighbours(bases, nn_d2, nn_idx, m, new_row) -> None:
    k = int(np.argmin(new_row))
    nn_d2[m], nn_idx[m] = new_row[k], k
    closer = new_row < nn_d2
    closer[m] = False
    nn_d2[closer] = new_row[closer]
    nn_idx[closer] = m
    # Points whose nearest neighbour was m and moved away need a fresh scan.
    stale = np.flatnonzero((nn_idx == m) & ~closer)
    for j in stale:
        if j == m:
            continue
        row = squared_distances(bases[j], bases)
        row[j] = np.inf
        k = int(np.argmin(row))
        nn_d2[j], nn_idx[j] = row[k], k


def random_code_experiment(
    n: int,
    p: int,
    field: FieldTag | str,
    K: int,
    trials: int = 20,
    samples_per_trial: int = 5000,
    rng: RandomLike = 0,
    workers: int = 1,
) -> RandomCodeTrial:
    """Draw ``trials`` random K-point codes and measure K**(2/t) times their mean distortion.

    Each trial uses a fresh code and fresh Haar queries; the returned standard
    error is the spread of the per-trial scaled means.
    """
    check_dimensions(n, p)
    f = FieldTag.parse(field)
    t = f.beta * p * (n - p)
    if t == 0:
        raise ArgumentError("G(n, n) has no distortion to scale")
    if trials < 2:
        raise ArgumentError("need at least two trials for a standard error")

    def one(size, gen):
        out = []
        for _ in range(size):
            code = Codebook(haar_bases(n, p, f, K, gen), f, CodebookMeta("random", mindist=0.0), check=False)
            q = haar_bases(n, p, f, samples_per_trial, gen)
            out.append(quantize_bases(code, q)[1])
        return np.array(out)

    w = np.concatenate(map_chunks(one, trials, rng, workers, chunk=1))
    scaled = K ** (2.0 / t) * w.mean(axis=1)
    return RandomCodeTrial(K, t, w, float(scaled.mean()), float(scaled.std(ddof=1) / math.sqrt(trials)))


# --- persistence -----------------------------------------------------------


class CodebookFormatError(ValueError):
    """Malformed codebook file; ``line`` and ``offset`` locate the problem."""

    def __init__(self, message: str, line: int | None = None, offset: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.offset = offset


class CodebookValidationError(ValueError):
    def __init__(self, message: str, index: int):
        super().__init__(f"entry {index}: {message}")
        self.index = index


_TOKEN = re.compile(r"^[A-Za-z0-9_.:+-]+$")
_HEADER_KEYS = ("field", "n", "p", "K", "designer", "seed", "mindist")


def header_line(C: Codebook) -> str:
    if not _TOKEN.match(C.meta.designer):
        raise ArgumentError(f"designer name {C.meta.designer!r} is not a single token")
    seed = int(C.meta.seed) % 2**64
    return (f"field={C.field.value} n={C.n} p={C.p} K={C.K} designer={C.meta.designer} "
            f"seed={seed} mindist={float(C.meta.mindist)!r}")


def dumps_codebook(C: Codebook) -> bytes:
    head = f"{FILE_MAGIC}\n{header_line(C)}\n".encode("ascii")
    dtype = "<c16" if C.field is FieldTag.COMPLEX else "<f8"
    return head + np.ascontiguousarray(C.bases, dtype=dtype).tobytes(order="C")


def save_codebook(C: Codebook, path) -> None:
    """Write the versioned text-header + little-endian binary codebook format."""
    data = dumps_codebook(C)
    tmp = f"{os.fspath(path)}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def loads_codebook(data: bytes) -> Codebook:
    first = data.find(b"\n")
    if first < 0:
        raise CodebookFormatError("missing header line", line=1, offset=len(data))
    if data[:first].decode("ascii", "replace") != FILE_MAGIC:
        raise CodebookFormatError(f"bad magic, expected {FILE_MAGIC!r}", line=1, offset=0)
    second = data.find(b"\n", first + 1)
    if second < 0:
        raise CodebookFormatError("missing metadata line", line=2, offset=first + 1)
    try:
        text = data[first + 1:second].decode("ascii")
    except UnicodeDecodeError as exc:
        raise CodebookFormatError("metadata line is not ASCII", line=2, offset=first + 1 + exc.start) from None
    fields = {}
    col = 0
    for tok in text.split(" "):
        if "=" not in tok:
            raise CodebookFormatError(f"token {tok!r} is not key=value", line=2, offset=first + 1 + col)
        k, v = tok.split("=", 1)
        fields[k] = (v, first + 1 + col)
        col += len(tok) + 1
    for key in _HEADER_KEYS:
        if key not in fields:
            raise CodebookFormatError(f"missing key {key!r}", line=2, offset=first + 1)

    def parse(key, conv):
        value, off = fields[key]
        try:
            return conv(value)
        except (ValueError, ArgumentError):
            raise CodebookFormatError(f"bad value {value!r} for {key!r}", line=2, offset=off) from None

    field = parse("field", FieldTag.parse)
    n, p, K = parse("n", int), parse("p", int), parse("K", int)
    seed = parse("seed", int)
    mindist = parse("mindist", float)
    designer = fields["designer"][0]
    if K < 1:
        raise CodebookFormatError("K must be >= 1", line=2, offset=fields["K"][1])
    try:
        check_dimensions(n, p)
    except ArgumentError as exc:
        raise CodebookFormatError(str(exc), line=2, offset=fields["n"][1]) from None

    start = second + 1
    width = 16 if field is FieldTag.COMPLEX else 8
    expected = K * n * p * width
    payload = data[start:]
    if len(payload) != expected:
        raise CodebookFormatError(
            f"payload has {len(payload)} bytes, expected {expected}", line=3, offset=start + min(len(payload), expected)
        )
    dtype = "<c16" if field is FieldTag.COMPLEX else "<f8"
    bases = np.frombuffer(payload, dtype=dtype).reshape(K, n, p).astype(field.dtype)
    for k in range(K):
        defect = orthonormality_defect(bases[k])
        if not defect <= ORTHONORMAL_TOL:
            raise CodebookValidationError(f"columns not orthonormal (defect {defect:.3g})", k)
    meta = CodebookMeta(designer=designer, seed=seed, mindist=mindist)
    return Codebook(bases, field, meta, check=False)


def load_codebook(path) -> Codebook:
    with open(path, "rb") as fh:
        return loads_codebook(fh.read())
