"""Ensemble stamping of an article's impacted area as length-4 geohashes.

Three candidate sources feed the rules: the publisher's affinity cells
(PUB), location-table hits (LT) and geocoder hits (BMA). Rules are evaluated
cumulatively and the stamp is the union of what every firing rule adds:

1. PUB present: stamp all PUB cells.
2. PUB present and some LT cell shares the prefix with some PUB cell: stamp all LT cells.
3. PUB present and some High/Medium BMA cell shares the prefix with PUB: stamp those BMA cells.
4. PUB absent and some LT cell shares the prefix with some High/Medium BMA cell:
   stamp all LT and High/Medium BMA cells.
5. PUB absent and LT empty: stamp High-confidence BMA cells.
6. Nothing stamped: the article stays unstamped.

A rule counts as fired only when its precondition holds and it contributes
at least one cell.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from localgeo.errors import ValidationError
from localgeo.geocoder import Confidence

PUB = "PUB"
LT = "LT"
BMA = "BMA"
STAMP_LENGTH = 4


@dataclass(frozen=True)
class CandidateSets:
    lt: frozenset[tuple[str, str]] = frozenset()
    bma: frozenset[tuple[str, Confidence]] = frozenset()
    pub: frozenset[str] | None = None

    @classmethod
    def build(
        cls,
        lt: Iterable[tuple[str, str]] = (),
        bma: Mapping[str, Confidence] | Iterable[tuple[str, Confidence]] = (),
        pub: Iterable[str] | None = None,
    ) -> CandidateSets:
        items = bma.items() if isinstance(bma, Mapping) else bma
        return cls(
            lt=frozenset(lt),
            bma=frozenset((g, Confidence.parse(c)) for g, c in items),
            pub=None if pub is None else frozenset(pub),
        )


@dataclass
class StampResult:
    article_id: str
    geohashes: set[str]
    provenance: dict[str, set[str]]
    rules_fired: set[int]
    locations: set[str] = field(default_factory=set)

    def to_dict(self) -> dict:
        return {
            "article_id": self.article_id,
            "geohashes": sorted(self.geohashes),
            "provenance": {g: sorted(p) for g, p in sorted(self.provenance.items())},
            "rules_fired": sorted(self.rules_fired),
            "locations": sorted(self.locations),
        }

    @classmethod
    def from_dict(cls, d: dict) -> StampResult:
        gh = set(d["geohashes"])
        prov = {g: set(p) for g, p in d.get("provenance", {}).items()}
        res = cls(
            article_id=d["article_id"],
            geohashes=gh,
            provenance=prov,
            rules_fired={int(r) for r in d["rules_fired"]},
            locations=set(d.get("locations", ())),
        )
        _check_lengths(gh, "stamp")
        if not res.article_id:
            raise ValidationError("stamp without article_id")
        return res


def _check_lengths(cells: Iterable[str], what: str) -> None:
    for g in cells:
        if not isinstance(g, str) or len(g) != STAMP_LENGTH:
            raise ValidationError(f"{what} geohash {g!r} is not of length {STAMP_LENGTH}")


def _any_shared(a: set[str], b: set[str], n: int) -> bool:
    if not a or not b:
        return False
    return bool({g[:n] for g in a} & {g[:n] for g in b})


def stamp(article_id: str, cands: CandidateSets, prefix_len: int = 2) -> StampResult:
    if not 1 <= prefix_len <= STAMP_LENGTH:
        raise ValidationError(f"prefix_len must be in [1, {STAMP_LENGTH}]")
    _check_lengths((g for g, _ in cands.lt), "LT")
    _check_lengths((g for g, _ in cands.bma), "BMA")
    if cands.pub is not None:
        _check_lengths(cands.pub, "PUB")

    lt = {g for g, _ in cands.lt}
    bma_hm = {g for g, c in cands.bma if c >= Confidence.MEDIUM}
    bma_high = {g for g, c in cands.bma if c is Confidence.HIGH}
    pub = set(cands.pub) if cands.pub is not None else None

    provenance: dict[str, set[str]] = defaultdict(set)
    fired: set[int] = set()

    def apply(rule: int, cells: set[str], source: str) -> None:
        if cells:
            fired.add(rule)
            for g in cells:
                provenance[g].add(source)

    if pub is not None:
        apply(1, pub, PUB)
        if _any_shared(lt, pub, prefix_len):
            apply(2, lt, LT)
        if _any_shared(bma_hm, pub, prefix_len):
            apply(3, bma_hm, BMA)
    else:
        if _any_shared(lt, bma_hm, prefix_len):
            apply(4, lt, LT)
            apply(4, bma_hm, BMA)
        if not lt:
            apply(5, bma_high, BMA)

    if not fired:
        fired = {6}
    stamped_lt = {loc for g, loc in cands.lt if g in provenance and LT in provenance[g]}
    return StampResult(
        article_id=article_id,
        geohashes=set(provenance),
        provenance=dict(provenance),
        rules_fired=fired,
        locations=stamped_lt,
    )
