"""Append-only pedigree with exact kinship and the mating rule table.

Mating rule table (applied to opposite-sex pairs, kinship evaluated on the
pedigree truncated to ``KINSHIP_DEPTH`` ancestral generations):

=============================  ========  =========
relationship                   kinship   decision
=============================  ========  =========
siblings, parent/child         >= 1/8    refused
half-siblings, double cousins  1/8       refused
avuncular                      1/8       refused
half-avuncular, great-grand    1/16      refused
parallel first cousins         1/16      refused
cross first cousins            1/16      eligible
first cousins once removed     1/32      refused
half first cousins             1/32      eligible
second cousins and beyond      <= 1/64   eligible
=============================  ========  =========
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

from ..errors import ConfigurationError

MALE, FEMALE = 0, 1
SEX_NAMES = ("male", "female")

#: Ancestral generations considered by the mating rules (reaches great-grandparents).
KINSHIP_DEPTH = 3

HALF = Fraction(1, 2)
EIGHTH = Fraction(1, 8)
SIXTEENTH = Fraction(1, 16)


@dataclass(frozen=True)
class Individual:
    id: int
    sex: int
    deme: str
    generation: int
    mother: Optional[int] = None
    father: Optional[int] = None

    @property
    def is_founder(self):
        return self.mother is None


class Pedigree:
    """Individuals indexed by consecutive integer ids, plus the list of unions."""

    def __init__(self):
        self.sex = []
        self.deme = []
        self.generation = []
        self.mother = []
        self.father = []
        self.unions = []  # (father, mother, generation of the parents)
        self._by_generation = {}

    def __len__(self):
        return len(self.sex)

    def __contains__(self, i):
        return isinstance(i, int) and 0 <= i < len(self.sex)

    def __getitem__(self, i):
        self._check(i)
        m, f = self.mother[i], self.father[i]
        return Individual(i, self.sex[i], self.deme[i], self.generation[i],
                          None if m < 0 else m, None if f < 0 else f)

    def _check(self, i):
        if i not in self:
            raise KeyError(f"individual {i!r} is not in the pedigree")

    def add(self, sex, deme, mother=None, father=None, generation=None):
        """Append one individual and return its id."""
        if sex not in (MALE, FEMALE):
            raise ConfigurationError(f"sex must be {MALE} (male) or {FEMALE} (female)")
        if (mother is None) != (father is None):
            raise ConfigurationError("non-founders need both parents")
        if mother is None:
            gen = 0 if generation is None else int(generation)
            m = f = -1
        else:
            self._check(mother)
            self._check(father)
            if self.sex[mother] != FEMALE or self.sex[father] != MALE:
                raise ConfigurationError("mother must be female and father male")
            gen = max(self.generation[mother], self.generation[father]) + 1
            if generation is not None and int(generation) != gen:
                raise ConfigurationError(f"child generation must be {gen}")
            m, f = mother, father
        i = len(self.sex)
        self.sex.append(sex)
        self.deme.append(deme)
        self.generation.append(gen)
        self.mother.append(m)
        self.father.append(f)
        self._by_generation.setdefault(gen, []).append(i)
        return i

    def add_union(self, father, mother):
        self.unions.append((father, mother, self.generation[father]))

    def members(self, generation):
        return list(self._by_generation.get(generation, ()))

    def parents(self, i):
        m = self.mother[i]
        return () if m < 0 else (m, self.father[i])

    def ancestors_by_depth(self, i, depth):
        """``levels[d]`` is the set of ancestors exactly ``d`` generations up (``levels[0] = {i}``)."""
        levels = [{i}]
        for _ in range(depth):
            nxt = set()
            for x in levels[-1]:
                nxt.update(self.parents(x))
            levels.append(nxt)
        return levels

    def ancestor_set(self, i, depth=KINSHIP_DEPTH):
        out = set()
        frontier = [i]
        for _ in range(depth):
            nxt = []
            for x in frontier:
                m = self.mother[x]
                if m >= 0:
                    nxt.append(m)
                    nxt.append(self.father[x])
            out.update(nxt)
            frontier = nxt
        return frozenset(out)

    def full_siblings(self, x, y):
        return (x != y and self.mother[x] >= 0
                and self.mother[x] == self.mother[y] and self.father[x] == self.father[y])

    def validate(self):
        """Check parent sexes, generation monotonicity and id order (hence acyclicity)."""
        for i in range(len(self)):
            m, f = self.mother[i], self.father[i]
            if m < 0:
                continue
            if not (m < i and f < i):
                raise ConfigurationError(f"individual {i} precedes a parent")
            if self.sex[m] != FEMALE or self.sex[f] != MALE:
                raise ConfigurationError(f"individual {i} lacks opposite-sex parents")
            if self.generation[i] != max(self.generation[m], self.generation[f]) + 1:
                raise ConfigurationError(f"individual {i} has an inconsistent generation")
        return True


def kinship_coefficient(ped, a, b, max_depth=None):
    """Exact kinship coefficient as a :class:`~fractions.Fraction`.

    Uses the recursion ``phi(x, x) = (1 + phi(mother, father)) / 2`` and
    ``phi(x, y) = (phi(mother(x), y) + phi(father(x), y)) / 2`` with ``x``
    the member of later generation; founders are unrelated and non-inbred.
    With ``max_depth`` set, individuals more than ``max_depth`` generations
    above the later of ``a`` and ``b`` are treated as founders.

    >>> ped = Pedigree()
    >>> dad, mum = ped.add(MALE, "A"), ped.add(FEMALE, "A")
    >>> kids = [ped.add(s, "A", mum, dad) for s in (MALE, FEMALE)]
    >>> kinship_coefficient(ped, *kids)
    Fraction(1, 4)
    """
    ped._check(a)
    ped._check(b)
    gen = ped.generation
    floor = None if max_depth is None else max(gen[a], gen[b]) - max_depth
    memo = {}

    def rootlike(x):
        return ped.mother[x] < 0 or (floor is not None and gen[x] <= floor)

    def phi(x, y):
        if (gen[x], x) < (gen[y], y):
            x, y = y, x
        key = (x, y)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if x == y:
            val = HALF if rootlike(x) else HALF * (1 + phi(ped.mother[x], ped.father[x]))
        elif rootlike(x):
            val = Fraction(0)
        else:
            val = HALF * (phi(ped.mother[x], y) + phi(ped.father[x], y))
        memo[key] = val
        return val

    return phi(a, b)


class MateCheck(NamedTuple):
    eligible: bool
    reason: str = ""
    kinship: Fraction = Fraction(0)


def _sibling_links(ped, a, b, depth):
    """Full-sibling pairs ``(s_a, s_b, i, j)`` with ``s_a`` ``i`` steps above a, ``s_b`` ``j`` above b."""
    la = ped.ancestors_by_depth(a, depth - 1)
    lb = ped.ancestors_by_depth(b, depth - 1)
    links = []
    for i, xs in enumerate(la):
        for j, ys in enumerate(lb):
            for x in xs:
                for y in ys:
                    if ped.full_siblings(x, y):
                        links.append((x, y, i, j))
    return links


def mate_eligibility(ped, a, b, depth=KINSHIP_DEPTH, ancestors=None):
    """Decide whether ``a`` and ``b`` may form a union under the rule table.

    ``ancestors`` optionally maps ids to precomputed :meth:`Pedigree.ancestor_set`
    results (same ``depth``) to speed up the common unrelated case.
    """
    if a == b:
        return MateCheck(False, "same individual")
    if ped.sex[a] == ped.sex[b]:
        return MateCheck(False, "same sex")
    anc_a = ancestors[a] if ancestors is not None and a in ancestors else ped.ancestor_set(a, depth)
    anc_b = ancestors[b] if ancestors is not None and b in ancestors else ped.ancestor_set(b, depth)
    if a in anc_b or b in anc_a:
        return MateCheck(False, "lineal relatives", kinship_coefficient(ped, a, b, depth))
    if anc_a.isdisjoint(anc_b):
        return MateCheck(True)
    phi = kinship_coefficient(ped, a, b, depth)
    if phi >= EIGHTH:
        return MateCheck(False, "kinship at least 1/8", phi)
    links = _sibling_links(ped, a, b, depth)
    steps = {(i, j) for _, _, i, j in links}
    if steps & {(0, 1), (1, 0)}:
        return MateCheck(False, "avuncular", phi)
    if steps & {(1, 2), (2, 1)}:
        return MateCheck(False, "first cousins once removed", phi)
    if phi > SIXTEENTH:
        return MateCheck(False, "kinship above 1/16", phi)
    if phi == SIXTEENTH:
        cousin = [(x, y) for x, y, i, j in links if (i, j) == (1, 1)]
        if not cousin or steps != {(1, 1)}:
            return MateCheck(False, "kinship 1/16 outside the first-cousin class", phi)
        if any(ped.sex[x] == ped.sex[y] for x, y in cousin):
            return MateCheck(False, "parallel first cousins", phi)
        return MateCheck(True, "cross first cousins", phi)
    return MateCheck(True, "", phi)


def audit_unions(ped, depth=KINSHIP_DEPTH):
    """Every recorded union that the rule table refuses, as ``(father, mother, reason)``."""
    bad = []
    for father, mother, _ in ped.unions:
        check = mate_eligibility(ped, father, mother, depth)
        if not check.eligible:
            bad.append((father, mother, check.reason))
    return bad


def write_pedigree(ped, path):
    """TSV export: id, sex, deme, generation, mother, father (``.`` for founders)."""
    with open(path, "w") as fh:
        fh.write("id\tsex\tdeme\tgeneration\tmother\tfather\n")
        for i in range(len(ped)):
            m, f = ped.mother[i], ped.father[i]
            fh.write(f"{i}\t{SEX_NAMES[ped.sex[i]]}\t{ped.deme[i]}\t{ped.generation[i]}\t"
                     f"{'.' if m < 0 else m}\t{'.' if f < 0 else f}\n")
    return path


def read_pedigree(path):
    """Inverse of :func:`write_pedigree`; ids must be 0..n-1 in file order."""
    ped = Pedigree()
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if header[:6] != ["id", "sex", "deme", "generation", "mother", "father"]:
            raise ConfigurationError(f"{path}: unexpected pedigree header {header}")
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            i, sex, deme, gen, m, f = line.rstrip("\n").split("\t")[:6]
            sex_code = SEX_NAMES.index(sex) if sex in SEX_NAMES else int(sex)
            mother = None if m == "." else int(m)
            father = None if f == "." else int(f)
            new = ped.add(sex_code, deme, mother, father, generation=int(gen))
            if new != int(i):
                raise ConfigurationError(f"{path}: ids must run 0..n-1 in order (got {i})")
    return ped
