"""Stage-one pattern analysis and backbone routing.

The sampled axes fix which bonds are matched; connected components of the
matched-bond graph form clusters. A pair of different-axis clusters joined
by two or more unmatched bonds would close a loop that no measurement can
remove, so one member of every such pair is disabled and its sites revert
to plain standard-basis readout. Routing then embeds the requested circuit
onto what is left: one horizontal wire per logical qubit inside its own row
band, a vertical staircase link for every CNOT, and per-site bookkeeping
roles naming where each interior widget gets its reference bit (a standard
neighbour, the boundary, or a renormalized cluster hanging off the site).

Routing failure is an ordinary return value carrying a diagnostic; the
normal remedy is a fresh stage-one sample, not an exception.
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lattice import Bond, HexLattice, Leg, Site, SiteKind, build_lattice
from .sampler import AxisAssignment

try:
    from . import _spanning as _spanning_impl

    SPANNING_BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on the build
    from . import _spanning_py as _spanning_impl

    SPANNING_BACKEND = "python"

FORMAT_VERSION = 1
DEFAULT_SPACING = 4
# Largest hanging cluster branch the renormalizer will fold.
RENORM_SITE_CAP = 12


# -- clusters -----------------------------------------------------------------


@dataclass(frozen=True)
class Cluster:
    """One connected component of the matched-bond graph."""

    id: int
    axis: str
    bonds: frozenset[Bond]
    sites: frozenset[Site]


def find_clusters(
    lattice: HexLattice,
    matched: frozenset[Bond],
    assignment: AxisAssignment,
) -> list[Cluster]:
    """Partition the matched bonds into clusters, id'd in row-major order.

    Sites without a matched bond belong to no cluster. Ids count up from 0
    following the row-major position of each cluster's first site, so the
    labelling is reproducible for a given assignment.
    """
    assignment.validate(lattice)
    parent: dict[Site, Site] = {}

    def find(s: Site) -> Site:
        while parent[s] != s:
            parent[s] = parent[parent[s]]
            s = parent[s]
        return s

    for b in matched:
        parent.setdefault(b.a, b.a)
        parent.setdefault(b.b, b.b)
        ra, rb = find(b.a), find(b.b)
        if ra != rb:
            # union by row-major minimum so the root is the first site
            lo, hi = sorted((ra, rb))
            parent[hi] = lo
    groups: dict[Site, list[Bond]] = {}
    for b in matched:
        groups.setdefault(find(b.a), []).append(b)
    clusters = []
    for cid, root in enumerate(sorted(groups)):
        bonds = groups[root]
        sites = {s for bond in bonds for s in (bond.a, bond.b)}
        axes = {assignment[s] for s in sites}
        if len(axes) != 1:
            raise ValueError(f"cluster at {root} mixes axes {sorted(axes)}")
        clusters.append(
            Cluster(cid, axes.pop(), frozenset(bonds), frozenset(sites))
        )
    return clusters


@dataclass(frozen=True)
class OffLimitsPair:
    """Two different-axis clusters joined by at least two unmatched bonds.

    ``disabled`` names the member chosen to revert to standard readout.
    """

    first: int
    second: int
    bonds: frozenset[Bond]
    disabled: int


def flag_off_limits(
    lattice: HexLattice,
    clusters: list[Cluster],
    matched: frozenset[Bond],
) -> list[OffLimitsPair]:
    """Flag loop-inducing cluster pairs and pick a member of each to disable.

    Greedy in ascending (first, second) id order: a pair whose member is
    already disabled needs nothing more; otherwise the smaller cluster goes
    (ties broken toward the lower id). One pass is enough for validity --
    every flagged pair ends up with at least one disabled member -- though
    the selection is not guaranteed minimal.
    """
    owner = {s: c.id for c in clusters for s in c.sites}
    axis = {c.id: c.axis for c in clusters}
    size = {c.id: len(c.sites) for c in clusters}
    joining: dict[tuple[int, int], set[Bond]] = {}
    for b in lattice.bonds():
        if b in matched:
            continue
        ca, cb = owner.get(b.a), owner.get(b.b)
        if ca is None or cb is None or ca == cb or axis[ca] == axis[cb]:
            continue
        key = (min(ca, cb), max(ca, cb))
        joining.setdefault(key, set()).add(b)
    out: list[OffLimitsPair] = []
    down: set[int] = set()
    for pair in sorted(joining):
        bonds = joining[pair]
        if len(bonds) < 2:
            continue
        if pair[0] in down:
            gone = pair[0]
        elif pair[1] in down:
            gone = pair[1]
        else:
            gone = min(pair, key=lambda i: (size[i], i))
            down.add(gone)
        out.append(OffLimitsPair(pair[0], pair[1], frozenset(bonds), gone))
    return out


def disabled_ids(pairs: list[OffLimitsPair]) -> frozenset[int]:
    return frozenset(p.disabled for p in pairs)


# -- backbone layout ----------------------------------------------------------


@dataclass(frozen=True)
class Degree2Wire:
    wire: int


@dataclass(frozen=True)
class Degree3Junction:
    wire: int


@dataclass(frozen=True)
class Associate:
    partner: Site


@dataclass(frozen=True)
class ClusterExtension:
    root: Site


@dataclass(frozen=True)
class Unused:
    pass


Role = Degree2Wire | Degree3Junction | Associate | ClusterExtension | Unused


@dataclass(frozen=True)
class JunctionPair:
    """CNOT plumbing: the degree-3 site on each wire plus the link between.

    ``control`` is the Top-kind z-axis site on the upper (control) wire,
    ``target`` the Bot-kind x-axis site on the lower (target) wire, and
    ``link`` the staircase of interior sites walking from control to
    target. The control site's stem bond reaches link[0]; link[-1]'s stem
    reaches the target site.
    """

    control: Site
    target: Site
    link: tuple[Site, ...]


@dataclass
class Backbone:
    """Routed embedding of a circuit onto one sampled axis pattern."""

    roles: dict[Site, Role]
    wires: tuple[tuple[Site, ...], ...]  # each ordered right edge -> left edge
    junctions: tuple[JunctionPair, ...]  # circuit order
    spacing: int

    def backbone_sites(self) -> frozenset[Site]:
        out: set[Site] = set()
        for path in self.wires:
            out.update(path)
        for j in self.junctions:
            out.update(j.link)
        return frozenset(out)

    def to_json(self, lattice: HexLattice) -> dict:
        def code(site: Site) -> str:
            role = self.roles.get(site, Unused())
            if isinstance(role, Degree2Wire):
                return f"w{role.wire}"
            if isinstance(role, Degree3Junction):
                return f"J{role.wire}"
            if isinstance(role, Associate):
                return "a"
            if isinstance(role, ClusterExtension):
                return "c"
            return "."

        return {
            "format_version": FORMAT_VERSION,
            "rows": lattice.rows,
            "cols": lattice.cols,
            "spacing": self.spacing,
            "grid": [
                [code((r, c)) for c in range(lattice.cols)]
                for r in range(lattice.rows)
            ],
            "wires": [[list(s) for s in path] for path in self.wires],
            "junctions": [
                {
                    "control": list(j.control),
                    "target": list(j.target),
                    "link": [list(s) for s in j.link],
                }
                for j in self.junctions
            ],
        }


@dataclass(frozen=True)
class RoutingFailure:
    """Why no backbone could be built on this axis pattern."""

    reason: str
    detail: str = ""


def _band(wire: int, spacing: int, rows: int) -> range:
    lo = wire * spacing
    return range(lo, min(lo + spacing, rows))


def _wire_path(
    lattice: HexLattice, band: range, blocked: frozenset[Site]
) -> tuple[Site, ...] | None:
    """Breadth-first right-to-left path inside the band, or None.

    Neighbour order prefers LEFT, so an unobstructed band yields the
    straight row at the band top and ties resolve reproducibly.
    """
    cols = lattice.cols
    starts = [(r, cols - 1) for r in band if (r, cols - 1) not in blocked]
    prev: dict[Site, Site | None] = {s: None for s in starts}
    queue = deque(starts)
    goal = None
    while queue:
        cur = queue.popleft()
        if cur[1] == 0:
            goal = cur
            break
        for leg in (Leg.LEFT, Leg.VERT, Leg.RIGHT):
            nb = lattice.neighbor(cur, leg)
            if (
                nb is None
                or nb in prev
                or nb[0] not in band
                or nb in blocked
            ):
                continue
            prev[nb] = cur
            queue.append(nb)
    if goal is None:
        return None
    path = [goal]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    path.reverse()
    return tuple(path)


def _has_free_z(
    assignment: AxisAssignment,
    path: tuple[Site, ...],
    used: set[Site],
    side: str,
    col: int,
) -> bool:
    """Is there an unclaimed z-axis site on the path strictly beyond col?"""
    for s in path:
        if s in used or assignment[s] != "z":
            continue
        if side == "right" and s[1] > col:
            return True
        if side == "left" and s[1] < col:
            return True
    return False


def _link_path(
    lattice: HexLattice,
    assignment: AxisAssignment,
    start: Site,
    forbidden: frozenset[Site],
    tgt_path: tuple[Site, ...],
    used: set[Site],
    frontier_tgt: int,
) -> tuple[tuple[Site, ...], Site] | None:
    """Staircase from below a control junction down to a usable target site.

    Walks interior sites (never wire, junction or blocked sites); succeeds
    on reaching a Top-kind site whose stem lands on an unclaimed x-axis
    Bot-kind site of the target path right of that wire's frontier.
    """
    tgt_sites = set(tgt_path)
    prev: dict[Site, Site | None] = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if lattice.kind(cur) is SiteKind.TOP:
            t = lattice.neighbor(cur, Leg.VERT)
            if (
                t is not None
                and t in tgt_sites
                and t not in used
                and assignment[t] == "x"
                and t[1] < frontier_tgt
                and _has_free_z(assignment, tgt_path, used, "right", t[1])
                and _has_free_z(assignment, tgt_path, used, "left", t[1])
            ):
                chain = [cur]
                while prev[chain[-1]] is not None:
                    chain.append(prev[chain[-1]])
                chain.reverse()
                return tuple(chain), t
        for leg in (Leg.VERT, Leg.LEFT, Leg.RIGHT):
            nb = lattice.neighbor(cur, leg)
            if nb is None or nb in prev or nb in forbidden:
                continue
            prev[nb] = cur
            queue.append(nb)
    return None


def route_backbone(
    lattice: HexLattice,
    assignment: AxisAssignment,
    clusters: list[Cluster],
    disabled: frozenset[int],
    circuit,
    spacing: int = DEFAULT_SPACING,
) -> Backbone | RoutingFailure:
    """Embed the circuit's wires and CNOT links onto the axis pattern.

    Wires live in disjoint row bands ``spacing`` rows apart; each CNOT gets
    a junction pair placed greedily from the right, left of every earlier
    junction on the wires it touches. Sites of disabled clusters are
    obstacles. The result is audited before it is returned, so a Backbone
    that comes back satisfies the layout invariants.
    """
    from .logic import CNOT  # deferred: logic builds on this module

    assignment.validate(lattice)
    if spacing < 1:
        return RoutingFailure("spacing-violation", "spacing must be >= 1")
    n_wires = circuit.wires
    if (n_wires - 1) * spacing > lattice.rows - 1:
        return RoutingFailure(
            "spacing-violation",
            f"{n_wires} wires at spacing {spacing} need "
            f"{(n_wires - 1) * spacing + 1} rows, lattice has {lattice.rows}",
        )
    owner = {s: c.id for c in clusters for s in c.sites}
    oversized = {
        c.id for c in clusters if len(c.sites) > RENORM_SITE_CAP
    }
    blocked = frozenset(
        s
        for c in clusters
        if c.id in disabled or c.id in oversized
        for s in c.sites
    )

    wires: list[tuple[Site, ...]] = []
    for w in range(n_wires):
        path = _wire_path(lattice, _band(w, spacing, lattice.rows), blocked)
        if path is None:
            return RoutingFailure(
                "no-percolating-path", f"wire {w} found no right-left path"
            )
        wires.append(path)
    wire_sites = {s: w for w, path in enumerate(wires) for s in path}

    junctions: list[JunctionPair] = []
    used: set[Site] = set()  # junction and link sites claimed so far
    frontier = {w: lattice.cols for w in range(n_wires)}
    for gate in circuit.gates:
        if not isinstance(gate, CNOT):
            continue
        ctl, tgt = gate.control, gate.target
        forbidden = blocked | set(wire_sites) | used
        placed = None
        for s in sorted(wires[ctl], key=lambda t: -t[1]):
            if (
                s in used
                or lattice.kind(s) is not SiteKind.TOP
                or assignment[s] != "z"
                or s[1] >= frontier[ctl]
                or s[1] >= frontier[tgt]
            ):
                continue
            if not _has_free_z(assignment, wires[ctl], used, "right", s[1]):
                continue
            if not _has_free_z(assignment, wires[ctl], used, "left", s[1]):
                continue
            below = lattice.neighbor(s, Leg.VERT)
            if below is None or below in forbidden:
                continue
            hit = _link_path(
                lattice,
                assignment,
                below,
                forbidden,
                wires[tgt],
                used,
                frontier[tgt],
            )
            if hit is not None:
                placed = (s, hit[1], hit[0])
                break
        if placed is None:
            return RoutingFailure(
                "no-junction-column",
                f"no junction pair for CNOT {ctl}->{tgt}",
            )
        top, bot, link = placed
        junctions.append(JunctionPair(top, bot, link))
        used.add(top)
        used.add(bot)
        used.update(link)
        frontier[ctl] = min(frontier[ctl], top[1])
        frontier[tgt] = min(frontier[tgt], bot[1])

    backbone = _assemble(
        lattice, assignment, clusters, owner, wires, junctions, spacing
    )
    if isinstance(backbone, RoutingFailure):
        return backbone
    problems = audit_backbone(
        lattice, assignment, backbone, circuit, clusters, disabled
    )
    if problems:
        return RoutingFailure("audit", "; ".join(problems[:4]))
    return backbone


def _backbone_adjacency(
    wires: list[tuple[Site, ...]], junctions: list[JunctionPair]
) -> dict[Site, set[Site]]:
    """Neighbours along wire paths, links and junction stem bonds."""
    adj: dict[Site, set[Site]] = {}

    def connect(a: Site, b: Site) -> None:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)

    for path in wires:
        for a, b in zip(path, path[1:]):
            connect(a, b)
    for j in junctions:
        chain = (j.control, *j.link, j.target)
        for a, b in zip(chain, chain[1:]):
            connect(a, b)
    return adj


def _assemble(
    lattice: HexLattice,
    assignment: AxisAssignment,
    clusters: list[Cluster],
    owner: dict[Site, int],
    wires: list[tuple[Site, ...]],
    junctions: list[JunctionPair],
    spacing: int,
) -> Backbone | RoutingFailure:
    """Attach roles (wire, junction, associate, extension) or report why not."""
    roles: dict[Site, Role] = {}
    junction_sites = {j.control for j in junctions} | {
        j.target for j in junctions
    }
    for w, path in enumerate(wires):
        for s in path:
            roles[s] = (
                Degree3Junction(w) if s in junction_sites else Degree2Wire(w)
            )
    for j in junctions:
        ctl_wire = roles[j.control].wire
        for s in j.link:
            roles[s] = Degree2Wire(ctl_wire)

    adj = _backbone_adjacency(wires, junctions)
    backbone_sites = set(adj)
    cluster_by_id = {c.id: c for c in clusters}
    cluster_adj: dict[Site, set[Site]] = {}
    for c in clusters:
        for b in c.bonds:
            cluster_adj.setdefault(b.a, set()).add(b.b)
            cluster_adj.setdefault(b.b, set()).add(b.a)

    # phase one: resolve every matched stem into a hanging branch
    extensions: set[Site] = set()
    stems: list[tuple[Site, Site]] = []
    for s in sorted(backbone_sites):
        if s in junction_sites:
            continue
        used_legs = {lattice.leg_between(s, nb) for nb in adj[s]}
        for leg in Leg:
            if leg in used_legs:
                continue
            n = lattice.neighbor(s, leg)
            if n is None:
                continue  # boundary termination feeds this widget
            if n in backbone_sites:
                return RoutingFailure(
                    "backbone-adjacency",
                    f"{s} and {n} touch outside the routed paths",
                )
            if assignment[n] != assignment[s]:
                stems.append((s, n))
                continue
            branch = _hanging_branch(cluster_adj, n, s, backbone_sites)
            if branch is None:
                return RoutingFailure(
                    "cluster-loop",
                    f"cluster branch at {s} reattaches to the backbone",
                )
            if len(branch) > RENORM_SITE_CAP:
                return RoutingFailure(
                    "cluster-too-large",
                    f"branch of {len(branch)} sites at {s}",
                )
            extensions.update(branch)
            for e in branch:
                roles.setdefault(e, ClusterExtension(root=s))

    # phase two: standard associates, for backbone and extension sites alike
    interior = backbone_sites | extensions
    for s in sorted(extensions):
        for leg in Leg:
            n = lattice.neighbor(s, leg)
            if n is None or n in cluster_adj.get(s, set()):
                continue
            if n in interior:
                return RoutingFailure(
                    "cluster-loop",
                    f"extension {s} touches interior site {n}",
                )
            stems.append((s, n))
    for s, n in stems:
        if n in interior:
            return RoutingFailure(
                "associate-unavailable",
                f"{n} is interior-measured, cannot anchor {s}",
            )
        cid = owner.get(n)
        if cid is not None and any(
            t in interior for t in cluster_by_id[cid].sites
        ):
            return RoutingFailure(
                "off-limits-leak",
                f"{n} sits in a cluster already tied to the backbone",
            )
        roles.setdefault(n, Associate(partner=s))

    return Backbone(
        roles=roles,
        wires=tuple(wires),
        junctions=tuple(junctions),
        spacing=spacing,
    )


def _hanging_branch(
    cluster_adj: dict[Site, set[Site]],
    first: Site,
    root: Site,
    backbone_sites: set[Site],
) -> frozenset[Site] | None:
    """Matched-graph component behind ``first``, or None if it touches the
    backbone anywhere besides the root stem (that would close a loop)."""
    seen = {first}
    queue = deque([first])
    while queue:
        cur = queue.popleft()
        for nb in cluster_adj.get(cur, ()):
            if nb in backbone_sites:
                if cur != first or nb != root:
                    return None
                continue
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return frozenset(seen)


# -- audit --------------------------------------------------------------------


def audit_backbone(
    lattice: HexLattice,
    assignment: AxisAssignment,
    backbone: Backbone,
    circuit,
    clusters: list[Cluster] = (),
    disabled: frozenset[int] = frozenset(),
) -> list[str]:
    """Independent invariant check; returns human-readable problems.

    Validates path shape and band discipline, junction typing and ordering,
    role consistency, reference-bit availability for every interior site,
    cluster containment, and that the interior-measured region closes no
    loop the circuit does not call for.
    """
    from .logic import CNOT

    problems: list[str] = []
    wires = backbone.wires
    if len(wires) != circuit.wires:
        problems.append(
            f"{len(wires)} wires routed, circuit wants {circuit.wires}"
        )
        return problems

    seen: set[Site] = set()
    for w, path in enumerate(wires):
        if not path or path[0][1] != lattice.cols - 1 or path[-1][1] != 0:
            problems.append(f"wire {w} does not span right to left")
            continue
        band = _band(w, backbone.spacing, lattice.rows)
        if len(set(path)) != len(path):
            problems.append(f"wire {w} revisits a site")
        for s in path:
            if s[0] not in band:
                problems.append(f"wire {w} leaves its band at {s}")
                break
        for a, b in zip(path, path[1:]):
            if b not in {n for _, n in lattice.incident(a)}:
                problems.append(f"wire {w} jumps {a}->{b}")
                break
        if seen & set(path):
            problems.append(f"wire {w} overlaps another wire")
        seen.update(path)

    cnots = [g for g in circuit.gates if isinstance(g, CNOT)]
    if len(backbone.junctions) != len(cnots):
        problems.append(
            f"{len(backbone.junctions)} junction pairs for {len(cnots)} CNOTs"
        )
        return problems
    frontier = {w: lattice.cols for w in range(len(wires))}
    for gate, j in zip(cnots, backbone.junctions):
        ctl, tgt = gate.control, gate.target
        if j.control not in wires[ctl]:
            problems.append(f"junction {j.control} not on wire {ctl}")
        if j.target not in wires[tgt]:
            problems.append(f"junction {j.target} not on wire {tgt}")
        if lattice.kind(j.control) is not SiteKind.TOP:
            problems.append(f"control junction {j.control} is not Top-kind")
        if lattice.kind(j.target) is not SiteKind.BOT:
            problems.append(f"target junction {j.target} is not Bot-kind")
        if assignment[j.control] != "z":
            problems.append(f"control junction {j.control} is not z-axis")
        if assignment[j.target] != "x":
            problems.append(f"target junction {j.target} is not x-axis")
        if j.control[1] >= frontier[ctl] or j.target[1] >= frontier[tgt]:
            problems.append(
                f"junction for CNOT {ctl}->{tgt} is right of an earlier one"
            )
        frontier[ctl] = min(frontier[ctl], j.control[1])
        frontier[tgt] = min(frontier[tgt], j.target[1])
        chain = (j.control, *j.link, j.target)
        for a, b in zip(chain, chain[1:]):
            if b not in {n for _, n in lattice.incident(a)}:
                problems.append(f"junction link jumps {a}->{b}")
                break
        if j.link:
            if lattice.neighbor(j.control, Leg.VERT) != j.link[0]:
                problems.append(f"link does not hang from {j.control}")
            if lattice.neighbor(j.link[-1], Leg.VERT) != j.target:
                problems.append(f"link does not land on {j.target}")

    adj = _backbone_adjacency(list(wires), list(backbone.junctions))
    backbone_sites = set(adj)
    junction_sites = {j.control for j in backbone.junctions} | {
        j.target for j in backbone.junctions
    }
    extensions = {
        s for s, r in backbone.roles.items() if isinstance(r, ClusterExtension)
    }
    blocked = {
        s for c in clusters if c.id in disabled for s in c.sites
    }
    if blocked & backbone_sites:
        problems.append("a disabled cluster site lies on the backbone")
    if blocked & extensions:
        problems.append("a disabled cluster site is marked for renormalization")

    for s in sorted(backbone_sites):
        role = backbone.roles.get(s)
        if s in junction_sites:
            if not isinstance(role, Degree3Junction):
                problems.append(f"junction {s} carries role {role}")
            if len(adj[s]) != 3 and lattice.degree(s) == 3:
                problems.append(f"junction {s} has a spare leg")
            continue
        if not isinstance(role, Degree2Wire):
            problems.append(f"backbone site {s} carries role {role}")
        free = [leg for leg in Leg if leg not in
                {lattice.leg_between(s, nb) for nb in adj[s]}]
        for leg in free:
            n = lattice.neighbor(s, leg)
            if n is None:
                continue  # termination supplies the bit
            if n in backbone_sites:
                problems.append(f"{s} touches backbone site {n} off-path")
            elif assignment[n] == assignment[s]:
                if n not in extensions:
                    problems.append(f"matched stem at {s} not renormalized")
            elif not isinstance(backbone.roles.get(n), Associate):
                problems.append(f"{s} has no associate through {leg.value}")

    # the interior-measured region may close only the circuit's own loops
    region = backbone_sites | extensions
    edges = 0
    for s in sorted(region):
        for _, n in lattice.incident(s):
            if n in region and s < n:
                edges += 1
    comp = _component_count(lattice, region)
    region_rank = edges - len(region) + comp
    circuit_nodes = circuit.wires
    circuit_comp = _component_count_graph(
        range(circuit_nodes), [(g.control, g.target) for g in cnots]
    )
    circuit_rank = len(cnots) - circuit_nodes + circuit_comp
    if region_rank != circuit_rank:
        problems.append(
            f"interior region closes {region_rank} loops, "
            f"circuit calls for {circuit_rank}"
        )
    for c in clusters:
        touched = {w for w, path in enumerate(wires) if set(path) & c.sites}
        if len(touched) > 1:
            problems.append(f"cluster {c.id} touches wires {sorted(touched)}")
    return problems


def _component_count(lattice: HexLattice, region: set[Site]) -> int:
    left = set(region)
    comp = 0
    while left:
        comp += 1
        queue = deque([min(left)])
        left.discard(queue[0])
        while queue:
            cur = queue.popleft()
            for _, n in lattice.incident(cur):
                if n in left:
                    left.discard(n)
                    queue.append(n)
    return comp


def _component_count_graph(nodes, edges) -> int:
    parent = {n: n for n in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(n) for n in parent})


# -- percolation --------------------------------------------------------------


def spanning_probability(
    rows: int,
    cols: int,
    p: float,
    trials: int,
    rng_seed,
    jobs: int = 1,
) -> tuple[float, float]:
    """Monte Carlo left-right spanning fraction and its binomial stderr.

    Bonds of the brick-wall patch are occupied independently with
    probability ``p``; a trial spans when occupied bonds connect the left
    and right columns. Each trial draws from its own spawned seed, so the
    estimate is reproducible and independent of ``jobs``. ``rng_seed`` may
    be an int or a sequence of ints.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"occupation probability {p} outside [0, 1]")
    lat = build_lattice(rows, cols)
    bonds = lat.bonds()
    bond_a = np.array([lat.site_index(b.a) for b in bonds], dtype=np.int32)
    bond_b = np.array([lat.site_index(b.b) for b in bonds], dtype=np.int32)
    left = np.arange(0, rows * cols, cols, dtype=np.int32)
    right = left + np.int32(cols - 1)
    children = np.random.SeedSequence(rng_seed).spawn(trials)

    def run(chunk) -> int:
        occ = np.empty((len(chunk), len(bonds)), dtype=np.uint8)
        for i, child in enumerate(chunk):
            occ[i] = np.random.default_rng(child).random(len(bonds)) < p
        return int(
            _spanning_impl.count_spans(
                rows * cols, bond_a, bond_b, occ, left, right
            )
        )

    if jobs <= 1:
        hits = run(children)
    else:
        step = -(-trials // jobs)
        chunks = [children[i : i + step] for i in range(0, trials, step)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            hits = sum(pool.map(run, chunks))
    fraction = hits / trials
    stderr = float(np.sqrt(fraction * (1.0 - fraction) / trials))
    return fraction, stderr


def spanning_sweep(
    sizes: list[tuple[int, int]],
    ps: list[float],
    trials: int,
    rng_seed: int,
    jobs: int = 1,
) -> list[dict]:
    """Fractions over a (size, p) grid; rows ready for CSV emission."""
    out = []
    for si, (rows, cols) in enumerate(sizes):
        for pi, p in enumerate(ps):
            frac, err = spanning_probability(
                rows, cols, p, trials, [rng_seed, si, pi], jobs=jobs
            )
            out.append(
                {
                    "p": p,
                    "rows": rows,
                    "cols": cols,
                    "trials": trials,
                    "fraction": frac,
                    "stderr": err,
                }
            )
    return out


def crossing_estimate(
    small: tuple[int, int],
    large: tuple[int, int],
    ps: list[float],
    trials: int,
    rng_seed: int,
    jobs: int = 1,
) -> float | None:
    """p where the two sizes' spanning curves cross (linear interpolation).

    Below the transition the larger patch spans less often, above it more,
    so the sign flip of (small - large) brackets the critical point.
    """
    rows = spanning_sweep([small, large], ps, trials, rng_seed, jobs=jobs)
    half = len(ps)
    diff = [rows[i]["fraction"] - rows[half + i]["fraction"] for i in range(half)]
    for i in range(half - 1):
        if diff[i] > 0.0 >= diff[i + 1]:
            span = diff[i] - diff[i + 1]
            frac = diff[i] / span if span > 0 else 0.5
            return ps[i] + frac * (ps[i + 1] - ps[i])
    return None
