"""Circuit layer: gates, byproduct frames, plan compilation, protocol runs.

A routed backbone fixes where the logical wires live; this module turns a
circuit into a concrete measurement plan on that backbone, then drives the
two measurement stages and the mod-2 byproduct bookkeeping. Every interior
widget contributes X/Z exponents determined by its own outcome and by the
reference bit arriving on its third leg (a standard neighbour, the pinned
boundary, or a renormalized matched cluster). Logical readout is the frame-
corrected boundary bit at the left end of each wire.

Compilation failures, like routing failures, are values: the caller's
remedy is a fresh stage-one sample.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .contraction import (
    DENSE_SITE_CAP,
    BoundaryTermination,
    DenseEngine,
    LatticeSizeError,
    StepOutcome,
)
from .lattice import HexLattice, Leg, Site, SiteKind
from .router import (
    DEFAULT_SPACING,
    Backbone,
    RoutingFailure,
    _backbone_adjacency,
    disabled_ids,
    find_clusters,
    flag_off_limits,
    route_backbone,
)
from .sampler import AxisAssignment, SampleMode, matched_bonds, stage1_sample
from .tensors import AXES, comp_covector, povm_element, standard_covector

FORMAT_VERSION = 1
MAX_ROUTE_ATTEMPTS = 256


class ProtocolError(RuntimeError):
    """The protocol cannot proceed (exhausted retries, broken reference)."""


# -- circuits -----------------------------------------------------------------


@dataclass(frozen=True)
class Init:
    wire: int


@dataclass(frozen=True)
class Rz:
    wire: int
    theta: float


@dataclass(frozen=True)
class Rx:
    wire: int
    theta: float


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int


@dataclass(frozen=True)
class Readout:
    wire: int


Gate = Init | Rz | Rx | CNOT | Readout


def _gate_wires(gate: Gate) -> tuple[int, ...]:
    if isinstance(gate, CNOT):
        return (gate.control, gate.target)
    return (gate.wire,)


@dataclass(frozen=True)
class CircuitSpec:
    """Wire count plus the ordered gate list.

    Every wire starts with its Init and ends with its Readout. CNOT wants
    control strictly above target (smaller wire index) because the control
    junction is Top-kind and hangs its stem downward.
    """

    wires: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))

    def validate(self) -> None:
        if self.wires < 1:
            raise ValueError("circuit needs at least one wire")
        for g in self.gates:
            for w in _gate_wires(g):
                if not 0 <= w < self.wires:
                    raise ValueError(f"gate {g} touches missing wire {w}")
            if isinstance(g, (Rz, Rx)) and not math.isfinite(g.theta):
                raise ValueError(f"gate {g} has a non-finite angle")
            if isinstance(g, CNOT) and g.control >= g.target:
                raise ValueError(
                    "CNOT control must ride the wire above its target"
                )
        for w in range(self.wires):
            seq = [g for g in self.gates if w in _gate_wires(g)]
            if not seq or not isinstance(seq[0], Init):
                raise ValueError(f"wire {w} must open with Init")
            if not isinstance(seq[-1], Readout):
                raise ValueError(f"wire {w} must close with Readout")
            if sum(isinstance(g, Init) for g in seq) != 1:
                raise ValueError(f"wire {w} has a stray Init")
            if sum(isinstance(g, Readout) for g in seq) != 1:
                raise ValueError(f"wire {w} has a stray Readout")

    def to_json(self) -> dict:
        out = []
        for g in self.gates:
            if isinstance(g, Init):
                out.append({"gate": "init", "wire": g.wire})
            elif isinstance(g, Rz):
                out.append({"gate": "rz", "wire": g.wire, "theta": g.theta})
            elif isinstance(g, Rx):
                out.append({"gate": "rx", "wire": g.wire, "theta": g.theta})
            elif isinstance(g, CNOT):
                out.append(
                    {"gate": "cnot", "control": g.control, "target": g.target}
                )
            else:
                out.append({"gate": "readout", "wire": g.wire})
        return {
            "format_version": FORMAT_VERSION,
            "wires": self.wires,
            "gates": out,
        }

    @staticmethod
    def from_json(data: dict) -> "CircuitSpec":
        gates: list[Gate] = []
        for entry in data["gates"]:
            name = entry["gate"]
            if name == "init":
                gates.append(Init(int(entry["wire"])))
            elif name == "rz":
                gates.append(Rz(int(entry["wire"]), float(entry["theta"])))
            elif name == "rx":
                gates.append(Rx(int(entry["wire"]), float(entry["theta"])))
            elif name == "cnot":
                gates.append(
                    CNOT(int(entry["control"]), int(entry["target"]))
                )
            elif name == "readout":
                gates.append(Readout(int(entry["wire"])))
            else:
                raise ValueError(f"unknown gate {name!r}")
        spec = CircuitSpec(int(data["wires"]), tuple(gates))
        spec.validate()
        return spec


# -- byproduct frame ----------------------------------------------------------


@dataclass
class ByproductFrame:
    """Per-wire X and Z byproduct exponents, mod 2. Phase is not tracked."""

    ax: list[int]
    az: list[int]

    @staticmethod
    def zero(wires: int) -> "ByproductFrame":
        return ByproductFrame([0] * wires, [0] * wires)

    def copy(self) -> "ByproductFrame":
        return ByproductFrame(list(self.ax), list(self.az))

    def indices(self, wire: int) -> tuple[int, int]:
        return self.ax[wire], self.az[wire]

    def update(self, wire: int, dax: int, daz: int) -> None:
        self.ax[wire] ^= dax & 1
        self.az[wire] ^= daz & 1

    def snapshot(self) -> dict:
        return {"ax": list(self.ax), "az": list(self.az)}


def byproduct_indices(mu: str, b: int, c: int) -> tuple[int, int]:
    """X and Z exponents contributed by one interior widget.

    ``b`` is the widget's own outcome, ``c`` the reference bit delivered on
    its third leg. The exponents depend only on b xor c and the widget axis.
    """
    s = (b ^ c) & 1
    if mu == "x":
        return s, 1
    if mu == "y":
        return s, s ^ 1
    if mu == "z":
        return 1, s
    raise ValueError(f"unknown axis {mu!r}")


def adapt_angle(
    theta: float, frame: ByproductFrame, axis: str, wire: int = 0
) -> float:
    """Sign-adapt a rotation angle to the accumulated frame.

    A z-rotation flips with the X exponent, an x-rotation with the Z
    exponent; no other axis is ever adapted.
    """
    ax, az = frame.indices(wire)
    if axis == "z":
        flip = ax
    elif axis == "x":
        flip = az
    else:
        raise ValueError(f"rotations along {axis!r} are not adapted")
    return -theta if flip else theta


# -- cluster renormalization ----------------------------------------------------


def _termination_reference(
    lattice: HexLattice,
    term: BoundaryTermination | None,
    site: Site,
    leg: Leg,
) -> tuple[str, int]:
    """Reference (axis, bit) the pinned boundary feeds a widget leg.

    A ket put on a bra-role leg labels the bit directly; a bra put on a
    ket-role leg labels its complement.
    """
    if term is None:
        raise ProtocolError(
            f"interior site {site} leans on an unpinned boundary"
        )
    vec = term.vec_for(lattice, site, leg)
    bit = vec.bit ^ (1 if vec.role == "bra" else 0)
    return vec.axis, bit


def _running_flip(nu: str, dax: int, daz: int) -> int:
    """How one widget's exponents move a bit carried in the ``nu`` frame."""
    if nu == "x":
        return daz
    if nu == "y":
        return dax ^ daz
    return dax


@dataclass
class _FoldCtx:
    lattice: HexLattice
    assignment: AxisAssignment
    cluster_adj: dict[Site, set[Site]]
    interior: frozenset[Site]
    term: BoundaryTermination | None
    mu: str
    bit_of: "callable"
    nu_map: dict[Site, str]
    assoc_sites: list[Site]
    member_sites: list[Site]
    sums: list[int]  # [sum ax, sum az]


def _stem_inputs(ctx: _FoldCtx, site: Site) -> list[tuple[str, int, Site | None]]:
    """Standard inputs on this cluster site's unmatched legs, in leg order."""
    out = []
    for leg in Leg:
        n = ctx.lattice.neighbor(site, leg)
        if n is not None and n in ctx.cluster_adj.get(site, ()):
            continue
        if n is None:
            axis, bit = _termination_reference(ctx.lattice, ctx.term, site, leg)
            if axis == ctx.mu:
                raise ProtocolError(
                    f"boundary frame at {site} matches the cluster axis"
                )
            out.append((axis, bit, None))
        else:
            if n in ctx.interior:
                raise ProtocolError(
                    f"cluster site {site} leaks onto interior-measured {n}"
                )
            out.append((ctx.assignment[n], ctx.bit_of(n), n))
    return out


def _component(adj: dict[Site, set[Site]], start: Site, avoid: Site) -> set[Site]:
    """Connected component of ``start`` in ``adj`` with one node removed."""
    comp = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for nb in adj.get(cur, ()):
            if nb != avoid and nb not in comp:
                comp.add(nb)
                stack.append(nb)
    return comp


def _bfs_path(
    adj: dict[Site, set[Site]], start: Site, goal: Site, avoid: Site
) -> list[Site]:
    """Shortest path start..goal in ``adj`` skipping ``avoid``, sorted ties."""
    prev: dict[Site, Site | None] = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur == goal:
            path = [cur]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            return path[::-1]
        for nb in sorted(adj.get(cur, ())):
            if nb != avoid and nb not in prev:
                prev[nb] = cur
                queue.append(nb)
    raise ProtocolError(f"matched loop through {avoid} does not close")


def _fold_site(
    ctx: _FoldCtx, site: Site, parent: Site, seen: set[Site]
) -> tuple[str, int]:
    """Fold the matched subgraph hanging at ``site`` into (nu, bit).

    Each tree site consumes exactly two inputs (folded children and
    standard stems): one acts as the reference for its own exponent
    contribution, the other keeps running toward the root. When two
    children close a cycle through this site, the whole loop collapses by
    the loop rule instead and this site keeps its leg toward ``parent``.
    """
    seen.add(site)
    ctx.member_sites.append(site)
    children = sorted(n for n in ctx.cluster_adj.get(site, ()) if n != parent)
    if len(children) == 2:
        comp = _component(ctx.cluster_adj, children[0], avoid=site)
        if children[1] in comp:
            return _fold_cycle(ctx, site, children, seen)
    stems = _stem_inputs(ctx, site)
    inputs: list[tuple[str, int]] = []
    for child in children:
        inputs.append(_fold_site(ctx, child, site, seen))
    for axis, bit, n in stems:
        inputs.append((axis, bit))
        if n is not None:
            ctx.assoc_sites.append(n)
    if len(inputs) != 2:
        raise ProtocolError(
            f"cluster site {site} has {len(inputs)} inputs, needs 2"
        )
    # reference versus running input, by a fixed structural rule: a lone
    # stem is the reference; otherwise the first input (first-leg stem at a
    # leaf, smaller-site child at a bifurcation) takes that part
    if len(stems) == 1:
        partner, running = inputs[1], inputs[0]
    else:
        partner, running = inputs[0], inputs[1]
    nu_p, c_p = partner
    ctx.nu_map[site] = nu_p
    dax, daz = byproduct_indices(ctx.mu, ctx.bit_of(site), c_p)
    ctx.sums[0] ^= dax
    ctx.sums[1] ^= daz
    nu_r, c_r = running
    return nu_r, c_r ^ _running_flip(nu_r, dax, daz)


def _fold_cycle(
    ctx: _FoldCtx, zeroth: Site, pair: list[Site], seen: set[Site]
) -> tuple[str, int]:
    """Fold a matched loop closing through ``zeroth`` into (nu, bit).

    The zeroth site keeps its third leg open toward the rest of the fold.
    Every other loop site contributes exponents against its own reference
    (a stem or a side subtree), the X exponents cancel around the loop, and
    the delivered bit flips with the accumulated Z exponents for an x-axis
    loop or the accumulated X exponents for a z-axis loop.
    """
    if ctx.mu == "y":
        raise ProtocolError("matched loops on a y-axis cluster are not folded")
    cycle = [zeroth] + _bfs_path(ctx.cluster_adj, pair[0], pair[1], zeroth)
    ring = set(cycle)
    sx = sz = 0
    for i, k in enumerate(cycle[1:], start=1):
        seen.add(k)
        ctx.member_sites.append(k)
        around = {cycle[i - 1], cycle[(i + 1) % len(cycle)]}
        side = [n for n in ctx.cluster_adj.get(k, ()) if n not in around]
        if any(n in ring for n in side):
            raise ProtocolError(f"loop site {k} has a chord")
        stems = _stem_inputs(ctx, k)
        if side:
            if len(side) != 1 or stems:
                raise ProtocolError(f"loop site {k} is overconnected")
            nu_p, c_p = _fold_site(ctx, side[0], k, seen)
        else:
            if len(stems) != 1:
                raise ProtocolError(f"loop site {k} needs exactly one stem")
            nu_p, c_p, n = stems[0]
            if n is not None:
                ctx.assoc_sites.append(n)
        ctx.nu_map[k] = nu_p
        dax, daz = byproduct_indices(ctx.mu, ctx.bit_of(k), c_p)
        sx ^= dax
        sz ^= daz
    ctx.sums[0] ^= sx
    ctx.sums[1] ^= sz
    nu0 = "x" if ctx.mu == "z" else "z"
    ctx.nu_map[zeroth] = nu0
    acc = sz if ctx.mu == "z" else sx
    return nu0, ctx.bit_of(zeroth) ^ acc ^ 1


def _matched_adjacency(
    lattice: HexLattice, assignment: AxisAssignment
) -> dict[Site, set[Site]]:
    adj: dict[Site, set[Site]] = {}
    for bond in matched_bonds(lattice, assignment):
        adj.setdefault(bond.a, set()).add(bond.b)
        adj.setdefault(bond.b, set()).add(bond.a)
    return adj


def _fold_branch(
    lattice: HexLattice,
    assignment: AxisAssignment,
    cluster_adj: dict[Site, set[Site]],
    first: Site,
    root: Site,
    interior: frozenset[Site],
    term: BoundaryTermination | None,
    bit_of,
) -> tuple[str, int, tuple[int, int], _FoldCtx]:
    ctx = _FoldCtx(
        lattice=lattice,
        assignment=assignment,
        cluster_adj=cluster_adj,
        interior=interior,
        term=term,
        mu=assignment[first],
        bit_of=bit_of,
        nu_map={},
        assoc_sites=[],
        member_sites=[],
        sums=[0, 0],
    )
    nu, cbar = _fold_site(ctx, first, root, set())
    return nu, cbar, (ctx.sums[0], ctx.sums[1]), ctx


def renormalize_cluster(
    lattice: HexLattice,
    assignment: AxisAssignment,
    cluster,
    root: Site,
    outcomes,
    term: BoundaryTermination | None = None,
    interior: frozenset[Site] = frozenset(),
) -> tuple[int, str, tuple[int, int]]:
    """Fold the matched branch hanging off ``root`` into the bit it hands
    back.

    ``cluster`` carries the matched bonds (anything with ``.bonds``);
    ``outcomes`` maps every branch site and every standard neighbour the
    branch leans on to its measured outcome. Returns the delivered bit, the
    frame it is delivered in, and the branch's accumulated (X, Z) exponent
    sums. Chains flip the running bit per site, a bifurcation folds its
    smaller child into the reference, and a closed loop collapses with its
    X exponents cancelling.
    """
    cluster_adj: dict[Site, set[Site]] = {}
    for bond in cluster.bonds:
        cluster_adj.setdefault(bond.a, set()).add(bond.b)
        cluster_adj.setdefault(bond.b, set()).add(bond.a)
    block = frozenset(interior | {root})
    heads = [n for n in sorted(cluster_adj.get(root, ())) if n not in block]
    if len(heads) != 1:
        raise ProtocolError(
            f"root {root} anchors {len(heads)} branches, needs exactly 1"
        )
    nu, cbar, sums, _ = _fold_branch(
        lattice,
        assignment,
        cluster_adj,
        heads[0],
        root,
        block,
        term,
        outcomes.__getitem__,
    )
    return cbar, nu, sums


# -- measurement plans ----------------------------------------------------------


@dataclass(frozen=True)
class Reference:
    """Where an interior widget's reference bit comes from at run time."""

    kind: str  # "associate" | "termination" | "branch"
    axis: str
    site: Site | None = None  # associate site
    bit: int = 0  # termination label, already role-adjusted
    first: Site | None = None  # branch entry site


@dataclass(frozen=True)
class PlanSite:
    site: Site
    kind: str  # "standard" | "complementary"
    axis: str
    partner_axis: str | None = None
    theta: float = 0.0
    role: str = "sea"
    wire: int | None = None
    gate: int | None = None  # circuit index, set for adapted rotations


@dataclass(frozen=True)
class FrameEvent:
    kind: str  # "init" | "widget" | "cnot" | "readout"
    sites: tuple[Site, ...]
    wire: int | None = None
    gate: int | None = None


@dataclass(frozen=True)
class CompileFailure:
    reason: str
    detail: str = ""


@dataclass
class MeasurementPlan:
    """Ordered per-site bases plus the frame bookkeeping schedule.

    ``order`` covers every lattice site exactly once; ``finalize[i]`` names
    the frame event completed by measuring ``order[i]``. ``depends`` has an
    entry only for runtime-adapted rotation sites: the outcomes feeding
    their sign. Fiducial sites never acquire incoming edges.
    """

    order: tuple[PlanSite, ...]
    finalize: tuple[int | None, ...]
    events: tuple[FrameEvent, ...]
    reference: dict[Site, Reference]
    depends: dict[Site, frozenset[Site]]
    init_sites: dict[int, Site]
    readout_sites: dict[int, Site]
    wires: int

    def plan_site(self, site: Site) -> PlanSite:
        for ps in self.order:
            if ps.site == site:
                return ps
        raise KeyError(site)

    def interior_sites(self) -> frozenset[Site]:
        return frozenset(
            ps.site for ps in self.order if ps.kind == "complementary"
        )

    def to_json(self) -> dict:
        sites = []
        for ps, fin in zip(self.order, self.finalize):
            entry = {
                "site": list(ps.site),
                "kind": ps.kind,
                "axis": ps.axis,
                "role": ps.role,
            }
            if ps.partner_axis is not None:
                entry["partner_axis"] = ps.partner_axis
            if ps.theta:
                entry["theta"] = ps.theta
            if ps.wire is not None:
                entry["wire"] = ps.wire
            if fin is not None:
                entry["completes_event"] = fin
            sites.append(entry)
        events = [
            {
                "kind": ev.kind,
                "sites": [list(s) for s in ev.sites],
                "wire": ev.wire,
                "gate": ev.gate,
            }
            for ev in self.events
        ]
        return {
            "format_version": FORMAT_VERSION,
            "wires": self.wires,
            "order": sites,
            "events": events,
            "depends": [
                {"site": list(s), "needs": sorted(list(x) for x in deps)}
                for s, deps in sorted(self.depends.items())
            ],
            "init_sites": {
                str(w): list(s) for w, s in sorted(self.init_sites.items())
            },
            "readout_sites": {
                str(w): list(s) for w, s in sorted(self.readout_sites.items())
            },
        }


def compile_plan(
    lattice: HexLattice,
    backbone: Backbone,
    assignment: AxisAssignment,
    circuit: CircuitSpec,
    term: BoundaryTermination | None = None,
) -> MeasurementPlan | CompileFailure:
    """Lay the circuit's gates onto the routed backbone, site by site.

    Walks every wire right to left in gate order: the first z-axis site
    takes the input, matching-axis sites take the rotations, junction pairs
    take the CNOTs with their fixed complementary bases, and the next
    z-axis site past the last gate takes the readout. Everything between
    becomes a fiducial identity widget; everything off the protocol stays
    standard. Failures are values, the caller resamples.
    """
    try:
        circuit.validate()
    except ValueError as exc:
        return CompileFailure("bad-circuit", str(exc))

    wires = backbone.wires
    junction_kind: dict[Site, str] = {}
    for j in backbone.junctions:
        junction_kind[j.control] = "control"
        junction_kind[j.target] = "target"
    adj = _backbone_adjacency(list(wires), list(backbone.junctions))
    cluster_adj = _matched_adjacency(lattice, assignment)
    backbone_set = backbone.backbone_sites()
    extensions: set[Site] = set()

    placed: dict[Site, PlanSite] = {}
    emitted: list[PlanSite] = []
    finalize: list[int | None] = []
    events: list[FrameEvent] = []
    reference: dict[Site, Reference] = {}
    depends: dict[Site, frozenset[Site]] = {}
    cones: list[set[Site]] = [set() for _ in range(circuit.wires)]
    init_sites: dict[int, Site] = {}
    readout_sites: dict[int, Site] = {}

    def emit(ps: PlanSite, fin: int | None = None) -> None:
        if ps.site in placed:
            if fin is not None:
                raise ProtocolError(f"{ps.site} measured twice")
            return
        placed[ps.site] = ps
        emitted.append(ps)
        finalize.append(fin)

    def resolve(s: Site) -> tuple[Reference, list[Site]] | CompileFailure:
        free = [
            leg
            for leg in Leg
            if (n := lattice.neighbor(s, leg)) is None
            or n not in adj.get(s, set())
        ]
        if len(free) != 1:
            return CompileFailure(
                "widget-legs", f"{s} has {len(free)} free legs"
            )
        mu = assignment[s]
        n = lattice.neighbor(s, free[0])
        if n is None:
            if term is None:
                return CompileFailure(
                    "unpinned-boundary", f"{s} needs a pinned boundary"
                )
            try:
                axis, bit = _termination_reference(lattice, term, s, free[0])
            except ProtocolError as exc:
                return CompileFailure("rank-deficient", str(exc))
            if axis == mu:
                return CompileFailure(
                    "rank-deficient",
                    f"boundary frame at {s} matches its axis {mu}",
                )
            return Reference("termination", axis, bit=bit), []
        if assignment[n] != mu:
            if n in extensions or (
                n in placed and placed[n].kind == "complementary"
            ):
                return CompileFailure(
                    "associate-clash", f"{s} leans on interior site {n}"
                )
            return Reference("associate", assignment[n], site=n), [n]
        if n in extensions:
            return CompileFailure(
                "branch-clash", f"cluster at {n} already folded elsewhere"
            )
        try:
            nu, _, _, ctx = _fold_branch(
                lattice,
                assignment,
                cluster_adj,
                n,
                s,
                frozenset(backbone_set | extensions),
                term,
                lambda _s: 0,
            )
        except ProtocolError as exc:
            return CompileFailure("branch-fold", str(exc))
        extensions.update(ctx.member_sites)
        ref_sites: list[Site] = []
        for a in ctx.assoc_sites:
            emit(PlanSite(a, "standard", assignment[a], role="associate"))
            ref_sites.append(a)
        for e in ctx.member_sites:
            emit(
                PlanSite(
                    e,
                    "complementary",
                    mu,
                    partner_axis=ctx.nu_map[e],
                    role="extension",
                )
            )
            ref_sites.append(e)
        return Reference("branch", nu, first=n), ref_sites

    def emit_widget(
        s: Site,
        w: int,
        theta: float = 0.0,
        gate: int | None = None,
        role: str = "widget",
    ) -> CompileFailure | None:
        res = resolve(s)
        if isinstance(res, CompileFailure):
            return res
        ref, ref_sites = res
        if ref.kind == "associate":
            emit(
                PlanSite(
                    ref.site, "standard", assignment[ref.site], role="associate"
                )
            )
        reference[s] = ref
        if theta != 0.0:
            depends[s] = frozenset(cones[w])
        ev = len(events)
        events.append(FrameEvent("widget", (s,), wire=w, gate=gate))
        emit(
            PlanSite(
                s,
                "complementary",
                assignment[s],
                partner_axis=ref.axis,
                theta=theta,
                role=role,
                wire=w,
                gate=gate,
            ),
            fin=ev,
        )
        cones[w].add(s)
        cones[w].update(ref_sites)
        return None

    pos = [0] * circuit.wires
    jcount = 0
    for gidx, gate in enumerate(circuit.gates):
        if isinstance(gate, Init):
            w, path = gate.wire, wires[gate.wire]
            i, found = pos[w], None
            while i < len(path):
                s = path[i]
                if s in junction_kind:
                    return CompileFailure(
                        "junction-before-input", f"wire {w} at {s}"
                    )
                if assignment[s] == "z":
                    found = i
                    break
                emit(PlanSite(s, "standard", assignment[s], role="pre", wire=w))
                i += 1
            if found is None:
                return CompileFailure("no-input-site", f"wire {w}")
            s = path[found]
            ev = len(events)
            events.append(FrameEvent("init", (s,), wire=w, gate=gidx))
            emit(PlanSite(s, "standard", "z", role="init", wire=w), fin=ev)
            init_sites[w] = s
            cones[w] = {s}
            pos[w] = found + 1
        elif isinstance(gate, (Rz, Rx)):
            w, path = gate.wire, wires[gate.wire]
            axis = "z" if isinstance(gate, Rz) else "x"
            i, done = pos[w], False
            while i < len(path):
                s = path[i]
                if s in junction_kind:
                    return CompileFailure(
                        "rotation-blocked",
                        f"wire {w} hits a junction before a {axis} site",
                    )
                if assignment[s] == axis:
                    bad = emit_widget(
                        s, w, theta=gate.theta, gate=gidx, role="rotation"
                    )
                    if bad is not None:
                        return bad
                    pos[w] = i + 1
                    done = True
                    break
                bad = emit_widget(s, w)
                if bad is not None:
                    return bad
                i += 1
            if not done:
                return CompileFailure(
                    "wire-exhausted", f"wire {w} lacks a free {axis} site"
                )
        elif isinstance(gate, CNOT):
            jp = backbone.junctions[jcount]
            jcount += 1
            for w, stop in (
                (gate.control, jp.control),
                (gate.target, jp.target),
            ):
                path = wires[w]
                i, hit = pos[w], False
                while i < len(path):
                    s = path[i]
                    if s == stop:
                        hit = True
                        break
                    if s in junction_kind:
                        return CompileFailure(
                            "junction-misordered", f"wire {w} at {s}"
                        )
                    bad = emit_widget(s, w)
                    if bad is not None:
                        return bad
                    i += 1
                if not hit:
                    return CompileFailure(
                        "junction-misordered",
                        f"junction {stop} not ahead on wire {w}",
                    )
                pos[w] = i + 1
            if assignment[jp.control] != "z" or assignment[jp.target] != "x":
                return CompileFailure(
                    "junction-axes", f"{jp.control} / {jp.target}"
                )
            link_refs: list[Site] = []
            link_sites: list[PlanSite] = []
            for k in jp.link:
                res = resolve(k)
                if isinstance(res, CompileFailure):
                    return res
                ref, ref_sites = res
                if ref.kind == "associate":
                    emit(
                        PlanSite(
                            ref.site,
                            "standard",
                            assignment[ref.site],
                            role="associate",
                        )
                    )
                reference[k] = ref
                link_refs.extend(ref_sites)
                link_sites.append(
                    PlanSite(
                        k,
                        "complementary",
                        assignment[k],
                        partner_axis=ref.axis,
                        role="link",
                        gate=gidx,
                    )
                )
            ev = len(events)
            events.append(
                FrameEvent(
                    "cnot", (jp.control, *jp.link, jp.target), gate=gidx
                )
            )
            emit(
                PlanSite(
                    jp.control,
                    "complementary",
                    "z",
                    partner_axis="x",
                    role="junction-control",
                    wire=gate.control,
                    gate=gidx,
                )
            )
            for ps in link_sites:
                emit(ps)
            emit(
                PlanSite(
                    jp.target,
                    "complementary",
                    "x",
                    partner_axis="z",
                    role="junction-target",
                    wire=gate.target,
                    gate=gidx,
                ),
                fin=ev,
            )
            shared = (
                cones[gate.control]
                | cones[gate.target]
                | {jp.control, jp.target}
                | set(jp.link)
                | set(link_refs)
            )
            cones[gate.control] = set(shared)
            cones[gate.target] = set(shared)
        else:  # Readout
            w, path = gate.wire, wires[gate.wire]
            i, found = pos[w], None
            while i < len(path):
                s = path[i]
                if s in junction_kind:
                    return CompileFailure(
                        "junction-after-gates", f"wire {w} at {s}"
                    )
                if assignment[s] == "z":
                    found = i
                    break
                bad = emit_widget(s, w)
                if bad is not None:
                    return bad
                i += 1
            if found is None:
                return CompileFailure("no-readout-site", f"wire {w}")
            s = path[found]
            # the readout outcome must stay free: a z-axis neighbour or a
            # z-pinned dangling leg copies or forces it, collapsing the
            # conditional readout distribution
            prev = path[found - 1]
            for leg in Leg:
                n = lattice.neighbor(s, leg)
                if n == prev:
                    continue
                if n is None:
                    if term is None or term.vec_for(lattice, s, leg).axis == "z":
                        return CompileFailure(
                            "readout-pinned",
                            f"wire {w} readout {s} pinned through {leg.value}",
                        )
                elif assignment[n] == "z":
                    return CompileFailure(
                        "readout-pinned",
                        f"wire {w} readout {s} copies into {n}",
                    )
            ev = len(events)
            events.append(FrameEvent("readout", (s,), wire=w, gate=gidx))
            emit(PlanSite(s, "standard", "z", role="readout", wire=w), fin=ev)
            readout_sites[w] = s
            for t in path[found + 1 :]:
                emit(PlanSite(t, "standard", assignment[t], role="post", wire=w))
            pos[w] = len(path)

    sea = [
        PlanSite(s, "standard", assignment[s], role="sea")
        for s in lattice.sites()
        if s not in placed
    ]
    order = tuple(sea) + tuple(emitted)
    fins = tuple([None] * len(sea)) + tuple(finalize)
    if len(order) != lattice.rows * lattice.cols:
        return CompileFailure(
            "coverage", f"{len(order)} plan sites on {lattice.rows * lattice.cols}"
        )
    return MeasurementPlan(
        order=order,
        finalize=fins,
        events=tuple(events),
        reference=reference,
        depends=depends,
        init_sites=init_sites,
        readout_sites=readout_sites,
        wires=circuit.wires,
    )


# -- protocol runtime -----------------------------------------------------------


@dataclass(frozen=True)
class LogicalOutcome:
    """Boundary bits per wire, before and after frame correction."""

    raw: tuple[int, ...]
    corrected: tuple[int, ...]


@dataclass
class RunRecord:
    """Per-site outcomes of one protocol run plus the raw readouts."""

    steps: list[StepOutcome]
    readouts: dict[int, int]

    def bit(self, site: Site) -> int:
        for step in self.steps:
            if step.site == site:
                return step.outcome
        raise KeyError(site)

    def outcomes(self) -> dict[Site, int]:
        return {step.site: step.outcome for step in self.steps}


def interpret_readout(
    record: RunRecord, frame: ByproductFrame
) -> LogicalOutcome:
    """Boundary bit per wire is the flipped readout; X exponent corrects it."""
    raw = []
    corrected = []
    for w in sorted(record.readouts):
        c = record.readouts[w] ^ 1
        raw.append(c)
        corrected.append(c ^ frame.ax[w])
    return LogicalOutcome(tuple(raw), tuple(corrected))


def _runtime_angle(ps: PlanSite, frame: ByproductFrame) -> float:
    if ps.kind != "complementary" or ps.theta == 0.0:
        return ps.theta if ps.kind == "complementary" else 0.0
    return adapt_angle(ps.theta, frame, ps.axis, ps.wire)


def _site_rows(ps: PlanSite, angle: float) -> list[np.ndarray]:
    if ps.kind == "standard":
        return [standard_covector(ps.axis, b) for b in (0, 1)]
    return [
        comp_covector(ps.axis, ps.partner_axis, angle, b) for b in (0, 1)
    ]


def _reference_bit(
    site: Site,
    ref: Reference,
    lattice: HexLattice,
    assignment: AxisAssignment,
    term: BoundaryTermination | None,
    cluster_adj: dict[Site, set[Site]],
    interior: frozenset[Site],
    outcomes: dict[Site, int],
) -> int:
    if ref.kind == "associate":
        return outcomes[ref.site]
    if ref.kind == "termination":
        return ref.bit
    nu, cbar, _, _ = _fold_branch(
        lattice,
        assignment,
        cluster_adj,
        ref.first,
        site,
        interior,
        term,
        outcomes.__getitem__,
    )
    if nu != ref.axis:
        raise ProtocolError(
            f"branch at {site} folded into frame {nu}, plan says {ref.axis}"
        )
    return cbar


def _apply_event(
    ev: FrameEvent,
    plan: MeasurementPlan,
    circuit: CircuitSpec,
    lattice: HexLattice,
    assignment: AxisAssignment,
    term: BoundaryTermination | None,
    cluster_adj: dict[Site, set[Site]],
    interior: frozenset[Site],
    outcomes: dict[Site, int],
    frame: ByproductFrame,
) -> None:
    """Fold one completed event's outcomes into the byproduct frame."""

    def ref_bit(s: Site) -> int:
        return _reference_bit(
            s,
            plan.reference[s],
            lattice,
            assignment,
            term,
            cluster_adj,
            interior,
            outcomes,
        )

    if ev.kind == "init":
        frame.ax[ev.wire] = outcomes[ev.sites[0]] & 1
        frame.az[ev.wire] = 0
    elif ev.kind == "widget":
        s = ev.sites[0]
        dax, daz = byproduct_indices(assignment[s], outcomes[s], ref_bit(s))
        frame.update(ev.wire, dax, daz)
    elif ev.kind == "cnot":
        top, bot = ev.sites[0], ev.sites[-1]
        sx = sz = 0
        for k in ev.sites[1:-1]:
            dax, daz = byproduct_indices(assignment[k], outcomes[k], ref_bit(k))
            sx ^= dax
            sz ^= daz
        gate = circuit.gates[ev.gate]
        q1 = outcomes[top] ^ sz ^ 1
        q2 = outcomes[bot] ^ sx ^ 1
        # propagate the running frame through the new CNOT, then compose
        # the junction's own byproduct
        frame.az[gate.control] ^= frame.az[gate.target]
        frame.ax[gate.target] ^= frame.ax[gate.control]
        frame.ax[gate.control] ^= 1
        frame.az[gate.control] ^= q1
        frame.ax[gate.target] ^= q2
        frame.az[gate.target] ^= 1
    # readout events leave the frame alone


def _polarized_engine(
    lattice: HexLattice,
    assignment: AxisAssignment,
    term: BoundaryTermination,
) -> DenseEngine:
    if lattice.rows * lattice.cols > DENSE_SITE_CAP:
        raise LatticeSizeError(
            f"exact protocol runs cap at {DENSE_SITE_CAP} sites"
        )
    engine = DenseEngine(lattice, term)
    for site in lattice.sites():
        engine.apply_op(site, povm_element(assignment[site]))
    return engine


def _drive(
    lattice: HexLattice,
    assignment: AxisAssignment,
    plan: MeasurementPlan,
    circuit: CircuitSpec,
    term: BoundaryTermination,
    mode: SampleMode,
    rng: np.random.Generator,
) -> tuple[RunRecord, ByproductFrame, list[dict]]:
    """Measure every site in plan order, tracking the frame event by event.

    Exact mode draws each outcome from the true conditional distribution,
    so the corrected readouts follow the logical circuit. Iid mode flips
    fair coins instead: it exercises the full control flow at any lattice
    size, but the coins carry no circuit information, so only the
    bookkeeping, not the logical statistics, is faithful.
    """
    cluster_adj = _matched_adjacency(lattice, assignment)
    interior = plan.interior_sites()
    engine = (
        _polarized_engine(lattice, assignment, term)
        if mode is SampleMode.EXACT
        else None
    )
    frame = ByproductFrame.zero(plan.wires)
    outcomes: dict[Site, int] = {}
    steps: list[StepOutcome] = []
    snapshots: list[dict] = []
    for ps, fin in zip(plan.order, plan.finalize):
        if engine is None:
            b, p = int(rng.integers(0, 2)), 0.5
        else:
            rows = _site_rows(ps, _runtime_angle(ps, frame))
            w0 = engine.weight()
            e = [
                max(
                    engine.effect_weight(ps.site, np.outer(np.conj(r), r)), 0.0
                )
                for r in rows
            ]
            total = e[0] + e[1]
            if not total > 0.0 or not np.isfinite(total) or w0 <= 0.0:
                raise ProtocolError(f"degenerate weights at {ps.site}")
            p0 = e[0] / total
            b = 0 if rng.random() < p0 else 1
            p = p0 if b == 0 else 1.0 - p0
            engine.project(ps.site, rows[b])
        outcomes[ps.site] = b
        steps.append(StepOutcome(ps.site, ps.kind, b, p))
        if fin is not None:
            ev = plan.events[fin]
            _apply_event(
                ev,
                plan,
                circuit,
                lattice,
                assignment,
                term,
                cluster_adj,
                interior,
                outcomes,
                frame,
            )
            snapshots.append(
                {"event": fin, "kind": ev.kind, **frame.snapshot()}
            )
    readouts = {w: outcomes[s] for w, s in plan.readout_sites.items()}
    return RunRecord(steps, readouts), frame, snapshots


@dataclass(frozen=True)
class ProtocolBranch:
    """One projective branch of an exact protocol run."""

    outcomes: tuple[tuple[Site, int], ...]
    probability: float
    frame: ByproductFrame
    logical: LogicalOutcome


def protocol_branches(
    lattice: HexLattice,
    assignment: AxisAssignment,
    plan: MeasurementPlan,
    circuit: CircuitSpec,
    term: BoundaryTermination,
    min_probability: float = 1e-12,
) -> list[ProtocolBranch]:
    """Enumerate every outcome branch of the plan with exact probabilities.

    Probabilities are conditioned on the given axis assignment. Branches
    lighter than ``min_probability`` are dropped; the survivors' weights
    still sum to 1 up to that cutoff.
    """
    cluster_adj = _matched_adjacency(lattice, assignment)
    interior = plan.interior_sites()
    base = _polarized_engine(lattice, assignment, term)
    out: list[ProtocolBranch] = []

    def descend(engine, idx, frame, outcomes, prob):
        if idx == len(plan.order):
            readouts = {
                w: outcomes[s] for w, s in plan.readout_sites.items()
            }
            record = RunRecord([], readouts)
            out.append(
                ProtocolBranch(
                    tuple(sorted(outcomes.items())),
                    prob,
                    frame,
                    interpret_readout(record, frame),
                )
            )
            return
        ps = plan.order[idx]
        fin = plan.finalize[idx]
        rows = _site_rows(ps, _runtime_angle(ps, frame))
        w0 = engine.weight()
        if w0 <= 0.0:
            return
        for b in (0, 1):
            e = max(
                engine.effect_weight(
                    ps.site, np.outer(np.conj(rows[b]), rows[b])
                ),
                0.0,
            )
            p = prob * (e / w0)
            if p <= min_probability:
                continue
            child = engine.branch(ps.site, rows[b])
            sub_out = dict(outcomes)
            sub_out[ps.site] = b
            sub_frame = frame.copy()
            if fin is not None:
                _apply_event(
                    plan.events[fin],
                    plan,
                    circuit,
                    lattice,
                    assignment,
                    term,
                    cluster_adj,
                    interior,
                    sub_out,
                    sub_frame,
                )
            descend(child, idx + 1, sub_frame, sub_out, p)

    descend(base, 0, ByproductFrame.zero(plan.wires), {}, 1.0)
    return out


def conditional_logical_table(
    branches: list[ProtocolBranch], plan: MeasurementPlan
) -> list[tuple[float, dict[tuple[int, ...], float]]]:
    """Group branches by every outcome except the readouts.

    Returns (group weight, corrected-outcome distribution) per group. If
    the protocol decouples, every group shows the same distribution.
    """
    readouts = set(plan.readout_sites.values())
    groups: dict[tuple, list[ProtocolBranch]] = {}
    for br in branches:
        key = tuple(
            (s, b) for s, b in br.outcomes if s not in readouts
        )
        groups.setdefault(key, []).append(br)
    table = []
    for key in sorted(groups):
        members = groups[key]
        weight = sum(br.probability for br in members)
        dist: dict[tuple[int, ...], float] = {}
        for br in members:
            dist[br.logical.corrected] = (
                dist.get(br.logical.corrected, 0.0) + br.probability / weight
            )
        table.append((weight, dist))
    return table


# -- full protocol --------------------------------------------------------------


def auto_spacing(lattice: HexLattice, circuit: CircuitSpec) -> int:
    """Widest wire band that still fits every wire on the patch."""
    if circuit.wires == 1:
        return max(1, min(DEFAULT_SPACING, lattice.rows))
    fit = (lattice.rows - 1) // (circuit.wires - 1)
    return max(1, min(DEFAULT_SPACING, fit))


@dataclass
class ProtocolResult:
    """Everything one protocol run produced, replayable from the seed."""

    outcome: LogicalOutcome
    record: RunRecord
    frames: list[dict]
    frame: ByproductFrame
    assignment: AxisAssignment
    backbone: Backbone
    plan: MeasurementPlan
    attempts: int
    seed: int
    mode: SampleMode

    def to_json(self, lattice: HexLattice) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "seed": self.seed,
            "mode": self.mode.value,
            "attempts": self.attempts,
            "rows": lattice.rows,
            "cols": lattice.cols,
            "assignment": self.assignment.to_json(lattice),
            "backbone": self.backbone.to_json(lattice),
            "steps": [
                {
                    "site": list(s.site),
                    "kind": s.kind,
                    "outcome": s.outcome,
                    "probability": s.probability,
                }
                for s in self.record.steps
            ],
            "frames": self.frames,
            "readouts": {
                str(w): m for w, m in sorted(self.record.readouts.items())
            },
            "raw": list(self.outcome.raw),
            "corrected": list(self.outcome.corrected),
        }


def prepare_protocol(
    lattice: HexLattice,
    assignment: AxisAssignment,
    circuit: CircuitSpec,
    term: BoundaryTermination,
    spacing: int | None = None,
):
    """Cluster, route and compile one axis pattern.

    Returns (backbone, plan) or the failure value from whichever stage
    declined.
    """
    if spacing is None:
        spacing = auto_spacing(lattice, circuit)
    matched = matched_bonds(lattice, assignment)
    clusters = find_clusters(lattice, matched, assignment)
    pairs = flag_off_limits(lattice, clusters, matched)
    backbone = route_backbone(
        lattice, assignment, clusters, disabled_ids(pairs), circuit, spacing
    )
    if isinstance(backbone, RoutingFailure):
        return backbone
    plan = compile_plan(lattice, backbone, assignment, circuit, term)
    if isinstance(plan, CompileFailure):
        return plan
    return backbone, plan


def run_protocol(
    lattice: HexLattice,
    term: BoundaryTermination | None,
    circuit: CircuitSpec,
    rng_seed: int,
    mode: SampleMode | str = SampleMode.EXACT,
    spacing: int | None = None,
    retries: int = MAX_ROUTE_ATTEMPTS,
) -> ProtocolResult:
    """Sample axis patterns until one routes, then run the full protocol.

    Each attempt draws a fresh stage-one sample from its own child seed, so
    results are reproducible from ``rng_seed`` alone. A ``term`` of None
    pins the boundary to the default z frame.
    """
    mode = SampleMode(mode)
    circuit.validate()
    if term is None:
        term = BoundaryTermination()
    root_ss = np.random.SeedSequence(rng_seed)
    last = "no attempt ran"
    for attempt, child in enumerate(root_ss.spawn(retries), start=1):
        s1, s2 = child.spawn(2)
        seed1 = int(s1.generate_state(1, np.uint64)[0])
        seed2 = int(s2.generate_state(1, np.uint64)[0])
        assignment = stage1_sample(lattice, term, mode, seed1)
        prepared = prepare_protocol(lattice, assignment, circuit, term, spacing)
        if isinstance(prepared, (RoutingFailure, CompileFailure)):
            last = f"{prepared.reason}: {prepared.detail}"
            continue
        backbone, plan = prepared
        record, frame, snaps = _drive(
            lattice,
            assignment,
            plan,
            circuit,
            term,
            mode,
            np.random.default_rng(seed2),
        )
        return ProtocolResult(
            outcome=interpret_readout(record, frame),
            record=record,
            frames=snaps,
            frame=frame,
            assignment=assignment,
            backbone=backbone,
            plan=plan,
            attempts=attempt,
            seed=rng_seed,
            mode=mode,
        )
    raise ProtocolError(
        f"no working embedding in {retries} attempts; last failure {last}"
    )
