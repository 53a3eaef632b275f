"""Source view ranking and the pair.txt view-pairing format.

Candidates are scored per sample point by a piecewise Gaussian of the
baseline angle between the two camera rays through the point (peaked a
few degrees away from zero so near-duplicate viewpoints rank low), summed
over all sample points.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .camera import Camera
from .formats import ParseError

__all__ = ["ScoreParams", "ViewPairing", "view_score", "rank_sources", "parse_pair_text", "format_pair_text", "load_pairing", "save_pairing"]


@dataclass(frozen=True)
class ScoreParams:
    """Angle weight: Gaussian with sigma_below inside theta0 degrees, sigma_above beyond."""

    theta0: float = 5.0
    sigma_below: float = 1.0
    sigma_above: float = 10.0


@dataclass(frozen=True)
class ViewPairing:
    reference: int
    ranked_sources: tuple[tuple[int, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "ranked_sources", tuple((int(i), float(s)) for i, s in self.ranked_sources))
        ids = [i for i, _ in self.ranked_sources]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate source ids in pairing")
        if self.reference in ids:
            raise ValueError("reference listed among its own sources")

    def top(self, m: int) -> list[int]:
        return [i for i, _ in self.ranked_sources[:m]]


def view_score(ref: Camera, candidate: Camera, sample_points, params: ScoreParams = ScoreParams()) -> float:
    """Sum of baseline-angle weights over the sample points.

    Points coincident with either camera center contribute 0.
    """
    pts = np.asarray(sample_points, dtype=np.float64).reshape(-1, 3)
    b1 = ref.center - pts
    b2 = candidate.center - pts
    n1 = np.linalg.norm(b1, axis=1)
    n2 = np.linalg.norm(b2, axis=1)
    ok = (n1 > 1e-12) & (n2 > 1e-12)
    cosang = np.clip((b1 * b2).sum(axis=1) / np.where(ok, n1 * n2, 1.0), -1.0, 1.0)
    theta = np.degrees(np.arccos(cosang))
    sigma = np.where(theta <= params.theta0, params.sigma_below, params.sigma_above)
    w = np.exp(-((theta - params.theta0) ** 2) / (2.0 * sigma**2))
    return float(np.where(ok, w, 0.0).sum())


def rank_sources(
    ref: Camera,
    candidates,
    sample_points,
    candidate_ids=None,
    reference_id: int = 0,
    params: ScoreParams = ScoreParams(),
) -> ViewPairing:
    """Rank candidate source views by descending score, ties broken by id."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("at least one candidate view is required")
    pts = np.asarray(sample_points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise ValueError("at least one sample point is required")
    if candidate_ids is None:
        candidate_ids = [i for i in range(len(candidates) + 1) if i != reference_id][: len(candidates)]
    if len(candidate_ids) != len(candidates):
        raise ValueError("candidate_ids length mismatch")
    scored = [(int(i), view_score(ref, cam, pts, params)) for i, cam in zip(candidate_ids, candidates)]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return ViewPairing(reference=reference_id, ranked_sources=tuple(scored))


# ---------------------------------------------------------------------------
# pair.txt
# ---------------------------------------------------------------------------
#
# Line 1: number of pairings.  Then per pairing two lines: the reference
# view id, and "n id1 score1 id2 score2 ...".


def parse_pair_text(text: str) -> list[ViewPairing]:
    lines = text.splitlines()
    idx = 0

    def next_line():
        nonlocal idx
        while idx < len(lines) and not lines[idx].strip():
            idx += 1
        if idx >= len(lines):
            raise ParseError("unexpected end of pair file", line=len(lines))
        idx += 1
        return lines[idx - 1].strip(), idx

    header, ln = next_line()
    try:
        count = int(header)
    except ValueError:
        raise ParseError(f"expected pairing count, got {header!r}", line=ln) from None
    if count < 0:
        raise ParseError(f"negative pairing count {count}", line=ln)
    pairings = []
    for _ in range(count):
        ref_line, ln = next_line()
        try:
            ref_id = int(ref_line)
        except ValueError:
            raise ParseError(f"expected reference view id, got {ref_line!r}", line=ln) from None
        if ref_id < 0:
            raise ParseError(f"negative view id {ref_id}", line=ln)
        src_line, ln = next_line()
        tokens = src_line.split()
        try:
            n_src = int(tokens[0])
        except (IndexError, ValueError):
            raise ParseError("expected source count", line=ln) from None
        if n_src < 0 or len(tokens) != 1 + 2 * n_src:
            raise ParseError(
                f"expected {1 + 2 * max(n_src, 0)} tokens for {n_src} sources, got {len(tokens)}",
                line=ln,
            )
        sources = []
        for k in range(n_src):
            try:
                sid = int(tokens[1 + 2 * k])
                score = float(tokens[2 + 2 * k])
            except ValueError:
                raise ParseError(f"bad source id/score pair at token {1 + 2 * k}", line=ln) from None
            if sid < 0:
                raise ParseError(f"negative view id {sid}", line=ln)
            sources.append((sid, score))
        try:
            pairings.append(ViewPairing(ref_id, tuple(sources)))
        except ValueError as exc:
            raise ParseError(str(exc), line=ln) from None
    return pairings


def format_pair_text(pairings) -> str:
    out = [str(len(pairings))]
    for p in pairings:
        out.append(str(p.reference))
        parts = [str(len(p.ranked_sources))]
        for sid, score in p.ranked_sources:
            parts.append(str(sid))
            parts.append(repr(float(score)))
        out.append(" ".join(parts))
    return "\n".join(out) + "\n"


def load_pairing(path) -> list[ViewPairing]:
    """Read and parse a pair.txt file."""
    return parse_pair_text(Path(path).read_text())


def save_pairing(pairings, path) -> None:
    Path(path).write_text(format_pair_text(pairings))
