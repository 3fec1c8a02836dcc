# case_io.py
"""
Read and write power network cases in the matrix-text dialect.

The dialect is the widely used ``mpc.<table> = [ ... ];`` layout: a
``baseMVA`` scalar plus ``bus``, ``gen``, ``branch`` and optional ``gencost``
tables. Two optional extension tables let a network round-trip exactly:

  - ``mpc.load``   rows ``id bus Pd Qd injection``  (overrides bus Pd/Qd)
  - ``mpc.shunt``  rows ``id bus Gs Bs``            (overrides bus Gs/Bs)

plus ``mpc.genfuel`` (a cell array of fuel names) and ``mpc.branch_imax``
(one per-unit current limit per branch row). Column meanings are documented
in docs/case_format.md.

Everything is converted to per-unit on ``baseMVA`` at ingestion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from pathlib import Path
import re

from src import config
from src.errors import CaseParseError, NetworkValidationError
from src.network.model import Branch, Bus, FuelType, Generator, Load, Network, Shunt

logger = config.LOGGER

# Minimum row arity per numeric table.
SECTION_ARITY: dict[str, int] = {
    "bus": 13,
    "gen": 10,
    "branch": 11,
    "gencost": 5,
    "load": 5,
    "shunt": 4,
    "branch_imax": 1,
}
REQUIRED_SECTIONS = ("bus", "gen", "branch")

_TABLE_START_RE = re.compile(r"^\s*mpc\.(?P<name>\w+)\s*=\s*(?P<open>[\[{])(?P<rest>.*)$")
_SCALAR_RE = re.compile(r"^\s*mpc\.baseMVA\s*=\s*(?P<value>[^;%]+);?")
_QUOTED_RE = re.compile(r"'([^']*)'|\"([^\"]*)\"")

# Bus type codes.
PQ, PV, REF, ISOLATED = 1, 2, 3, 4
POLYNOMIAL_COST = 2
_NUMBER_FORMAT = "{:.14g}"


@dataclass(slots=True)
class CaseDocument:
    """Raw tables of a case file, before any unit conversion."""
    base_mva: float | None = None
    sections: dict[str, list[list[float]]] = field(default_factory=dict)
    row_lines: dict[str, list[int]] = field(default_factory=dict)
    labels: dict[str, list[str]] = field(default_factory=dict)
    base_line: int | None = None

    def table(self, name: str) -> list[list[float]]:
        return self.sections.get(name, [])

    def line_of(self, name: str, row: int) -> int | None:
        lines = self.row_lines.get(name, [])
        return lines[row] if row < len(lines) else None


def _strip_comment(line: str) -> str:
    idx = line.find("%")
    return line if idx < 0 else line[:idx]


def _parse_number(token: str, line_no: int) -> float:
    try:
        return float(token)
    except ValueError as exc:
        error = f"malformed number {token!r}"
        logger.error("line %d: %s", line_no, error)
        raise CaseParseError(error, line=line_no) from exc


def parse_document(text: str) -> CaseDocument:
    """Split case text into raw numeric tables and string cell arrays."""
    doc = CaseDocument()
    open_name: str | None = None
    open_kind = ""
    pending: list[str] = []
    pending_line = 0

    def _flush_row(line_no: int) -> None:
        nonlocal pending
        if open_name is None or not pending:
            pending = []
            return
        if open_kind == "{":
            doc.labels.setdefault(open_name, []).extend(pending)
        else:
            row = [_parse_number(tok, line_no) for tok in pending]
            doc.sections.setdefault(open_name, []).append(row)
            doc.row_lines.setdefault(open_name, []).append(line_no)
        pending = []

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw_line)
        if open_name is None:
            scalar = _SCALAR_RE.match(line)
            if scalar:
                doc.base_mva = _parse_number(scalar.group("value").strip(), line_no)
                doc.base_line = line_no
                continue
            start = _TABLE_START_RE.match(line)
            if not start:
                continue
            open_name = start.group("name")
            open_kind = start.group("open")
            if open_kind == "[":
                doc.sections.setdefault(open_name, [])
                doc.row_lines.setdefault(open_name, [])
            else:
                doc.labels.setdefault(open_name, [])
            line = start.group("rest")

        closer = "]" if open_kind == "[" else "}"
        body, closed, _ = line.partition(closer)
        for chunk_idx, chunk in enumerate(body.split(";")):
            if chunk_idx > 0:
                _flush_row(pending_line)
            if open_kind == "{":
                tokens = [a or b for a, b in _QUOTED_RE.findall(chunk)]
            else:
                tokens = [tok for tok in re.split(r"[\s,]+", chunk.strip()) if tok]
            if tokens:
                if not pending:
                    pending_line = line_no
                pending.extend(tokens)
        if open_kind == "[":
            # Matrix rows also end at a line break.
            _flush_row(pending_line)
        if closed:
            _flush_row(pending_line)
            open_name = None

    if open_name is not None:
        error = f"unterminated mpc.{open_name} table"
        logger.error(error)
        raise CaseParseError(error)
    return doc


def _check_arity(doc: CaseDocument) -> None:
    for name, rows in doc.sections.items():
        minimum = SECTION_ARITY.get(name)
        if minimum is None or not rows:
            continue
        width = len(rows[0])
        for idx, row in enumerate(rows):
            if len(row) < minimum:
                error = f"mpc.{name} row has {len(row)} columns, expected at least {minimum}"
                logger.error(error)
                raise CaseParseError(error, line=doc.line_of(name, idx))
            if len(row) != width:
                error = f"mpc.{name} row has {len(row)} columns, expected {width} like the first row"
                logger.error(error)
                raise CaseParseError(error, line=doc.line_of(name, idx))


def _angle_limit(angmin_deg: float, angmax_deg: float) -> float:
    limit = min(abs(angmin_deg), abs(angmax_deg))
    if limit <= 0.0 or limit > 90.0:
        return config.DEFAULT_ANGLE_MAX
    return math.radians(limit)


def _fuel_of(label: str, line_no: int | None) -> FuelType:
    try:
        return FuelType(label.strip().lower())
    except ValueError as exc:
        error = f"unknown fuel type {label!r}"
        logger.error(error)
        raise CaseParseError(error, line=line_no) from exc


def _polynomial_costs(row: list[float], base: float, line_no: int | None) -> tuple[float, float, float]:
    model = int(row[0])
    if model != POLYNOMIAL_COST:
        error = "piecewise-linear cost rows are not supported; use polynomial (model 2)"
        logger.error(error)
        raise CaseParseError(error, line=line_no)
    ncost = int(row[3])
    coeffs = row[4 : 4 + ncost]
    if len(coeffs) != ncost:
        error = f"cost row declares {ncost} coefficients but carries {len(coeffs)}"
        logger.error(error)
        raise CaseParseError(error, line=line_no)
    # Highest order first; anything beyond quadratic must vanish.
    padded = [0.0] * max(0, 3 - ncost) + coeffs
    higher, (c2, c1, c0) = padded[:-3], padded[-3:]
    if any(c != 0.0 for c in higher):
        error = "cost polynomials above degree 2 are not supported"
        logger.error(error)
        raise CaseParseError(error, line=line_no)
    return c2 * base * base, c1 * base, c0


def build_network(doc: CaseDocument, name: str = "case") -> Network:
    """Validate a parsed document and convert it into a per-unit Network."""
    for section in REQUIRED_SECTIONS:
        if section not in doc.sections:
            error = f"missing {section} section"
            logger.error(error)
            raise CaseParseError(error)
    if doc.base_mva is None:
        error = "missing baseMVA"
        logger.error(error)
        raise CaseParseError(error)
    _check_arity(doc)
    base = doc.base_mva
    if base <= 0.0:
        error = f"baseMVA must be positive, got {base}"
        logger.error(error)
        raise CaseParseError(error, line=doc.base_line)

    try:
        buses: list[Bus] = []
        active: set[int] = set()
        seen: set[int] = set()
        bus_loads: list[Load] = []
        bus_shunts: list[Shunt] = []
        for idx, row in enumerate(doc.table("bus")):
            line_no = doc.line_of("bus", idx)
            bus_id = int(row[0])
            if bus_id in seen:
                error = f"duplicate bus id {bus_id}"
                logger.error(error)
                raise CaseParseError(error, line=line_no)
            seen.add(bus_id)
            if int(row[1]) == ISOLATED:
                continue
            active.add(bus_id)
            vm = row[7]
            buses.append(
                Bus(
                    id=bus_id,
                    vmin=row[12],
                    vmax=row[11],
                    setpoint_vm=None if math.isnan(vm) else vm,
                    base_kv=row[9],
                )
            )
            if row[2] != 0.0 or row[3] != 0.0:
                bus_loads.append(Load(id=bus_id, bus=bus_id, p=row[2] / base, q=row[3] / base))
            if row[4] != 0.0 or row[5] != 0.0:
                bus_shunts.append(Shunt(id=bus_id, bus=bus_id, gs=row[4] / base, bs=row[5] / base))

        def _check_bus(ref: int, what: str, line_no: int | None) -> bool:
            if ref in active:
                return True
            if ref in seen:
                return False
            error = f"{what} references bus {ref} absent from the bus section"
            logger.error(error)
            raise CaseParseError(error, line=line_no)

        loads = bus_loads
        if "load" in doc.sections:
            loads = []
            for idx, row in enumerate(doc.table("load")):
                line_no = doc.line_of("load", idx)
                if _check_bus(int(row[1]), f"load {int(row[0])}", line_no):
                    loads.append(
                        Load(id=int(row[0]), bus=int(row[1]), p=row[2] / base, q=row[3] / base, is_injection=bool(row[4]))
                    )
        shunts = bus_shunts
        if "shunt" in doc.sections:
            shunts = []
            for idx, row in enumerate(doc.table("shunt")):
                line_no = doc.line_of("shunt", idx)
                if _check_bus(int(row[1]), f"shunt {int(row[0])}", line_no):
                    shunts.append(Shunt(id=int(row[0]), bus=int(row[1]), gs=row[2] / base, bs=row[3] / base))

        fuels = doc.labels.get("genfuel", [])
        costs = doc.table("gencost")
        generators: list[Generator] = []
        for idx, row in enumerate(doc.table("gen")):
            line_no = doc.line_of("gen", idx)
            if not _check_bus(int(row[0]), f"generator row {idx + 1}", line_no) or row[7] <= 0:
                continue
            fuel = _fuel_of(fuels[idx], line_no) if idx < len(fuels) else FuelType.THERMAL
            if idx < len(costs):
                c2, c1, c0 = _polynomial_costs(costs[idx], base, doc.line_of("gencost", idx))
            else:
                c2, c1, c0 = config.FUEL_DEFAULT_COSTS[fuel.value]
            generators.append(
                Generator(
                    id=len(generators) + 1,
                    bus=int(row[0]),
                    pmin=row[9] / base,
                    pmax=row[8] / base,
                    qmin=row[4] / base,
                    qmax=row[3] / base,
                    fuel=fuel,
                    cost_c2=c2,
                    cost_c1=c1,
                    cost_c0=c0,
                )
            )

        imax = doc.table("branch_imax")
        branches: list[Branch] = []
        for idx, row in enumerate(doc.table("branch")):
            line_no = doc.line_of("branch", idx)
            from_ok = _check_bus(int(row[0]), f"branch row {idx + 1}", line_no)
            to_ok = _check_bus(int(row[1]), f"branch row {idx + 1}", line_no)
            if not (from_ok and to_ok) or row[10] <= 0:
                continue
            ratio = row[8] if row[8] != 0.0 else 1.0
            angmin, angmax = (row[11], row[12]) if len(row) >= 13 else (-360.0, 360.0)
            branches.append(
                Branch(
                    id=len(branches) + 1,
                    from_bus=int(row[0]),
                    to_bus=int(row[1]),
                    r=row[2],
                    x=row[3],
                    charge_b=row[4],
                    tap=ratio,
                    shift=math.radians(row[9]),
                    s_max=row[5] / base if row[5] > 0.0 else math.inf,
                    angle_max=_angle_limit(angmin, angmax),
                    i_max=imax[idx][0] if idx < len(imax) and imax[idx][0] > 0.0 else None,
                )
            )
    except NetworkValidationError as exc:
        raise CaseParseError(str(exc)) from exc

    try:
        return Network(
            base_mva=base,
            buses=buses,
            branches=branches,
            generators=generators,
            loads=loads,
            shunts=shunts,
            name=name,
        )
    except NetworkValidationError as exc:
        raise CaseParseError(str(exc)) from exc


def parse_case(text: str, name: str = "case") -> Network:
    """Parse matrix-text case content into a validated per-unit Network."""
    doc = parse_document(text)
    net = build_network(doc, name=name)
    logger.info("Parsed case %s: %s", name, net.summary())
    return net


def _fmt(value: float) -> str:
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    text = _NUMBER_FORMAT.format(value)
    return "0" if text == "-0" else text


def _row(values: list[float]) -> str:
    return "\t" + "\t".join(_fmt(v) for v in values) + ";"


def write_case(net: Network) -> str:
    """Serialize a Network back into the matrix-text dialect (MW basis)."""
    base = net.base_mva
    gen_buses = {gen.bus for gen in net.generators}
    ref_bus = net.reference_bus
    pd: dict[int, float] = {}
    qd: dict[int, float] = {}
    for load in net.loads:
        pd[load.bus] = pd.get(load.bus, 0.0) + load.p
        qd[load.bus] = qd.get(load.bus, 0.0) + load.q
    gs: dict[int, float] = {}
    bs: dict[int, float] = {}
    for shunt in net.shunts:
        gs[shunt.bus] = gs.get(shunt.bus, 0.0) + shunt.gs
        bs[shunt.bus] = bs.get(shunt.bus, 0.0) + shunt.bs

    func_name = re.sub(r"\W", "_", net.name) or "case"
    lines = [
        f"function mpc = {func_name}",
        "mpc.version = '2';",
        "",
        "%% system MVA base",
        f"mpc.baseMVA = {_fmt(base)};",
        "",
        "%% bus data",
        "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
        "mpc.bus = [",
    ]
    for bus in net.buses:
        bus_type = REF if bus.id == ref_bus else (PV if bus.id in gen_buses else PQ)
        vm = math.nan if bus.setpoint_vm is None else bus.setpoint_vm
        lines.append(
            _row(
                [
                    bus.id, bus_type,
                    pd.get(bus.id, 0.0) * base, qd.get(bus.id, 0.0) * base,
                    gs.get(bus.id, 0.0) * base, bs.get(bus.id, 0.0) * base,
                    1, vm, 0, bus.base_kv, 1, bus.vmax, bus.vmin,
                ]
            )
        )
    lines += [
        "];",
        "",
        "%% generator data",
        "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin",
        "mpc.gen = [",
    ]
    for gen in net.generators:
        lines.append(
            _row(
                [
                    gen.bus, 0.5 * (gen.pmin + gen.pmax) * base, 0,
                    gen.qmax * base, gen.qmin * base, 1, base, 1,
                    gen.pmax * base, gen.pmin * base,
                ]
            )
        )
    lines += [
        "];",
        "",
        "%% branch data",
        "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax",
        "mpc.branch = [",
    ]
    for br in net.branches:
        rate = br.s_max * base if br.has_flow_limit else 0.0
        limit_deg = math.degrees(br.angle_max)
        lines.append(
            _row(
                [
                    br.from_bus, br.to_bus, br.r, br.x, br.charge_b,
                    rate, rate, rate, br.tap, math.degrees(br.shift), 1,
                    -limit_deg, limit_deg,
                ]
            )
        )
    lines += [
        "];",
        "",
        "%% generator cost data",
        "%\t2\tstartup\tshutdown\tn\tc2\tc1\tc0",
        "mpc.gencost = [",
    ]
    for gen in net.generators:
        lines.append(_row([POLYNOMIAL_COST, 0, 0, 3, gen.cost_c2 / (base * base), gen.cost_c1 / base, gen.cost_c0]))
    lines += ["];", "", "%% generator fuel", "mpc.genfuel = {"]
    lines += [f"\t'{gen.fuel.value}';" for gen in net.generators]
    lines += ["};", "", "%% individual loads", "%\tid\tbus\tPd\tQd\tinjection", "mpc.load = ["]
    for load in net.loads:
        lines.append(_row([load.id, load.bus, load.p * base, load.q * base, int(load.is_injection)]))
    lines += ["];", "", "%% individual shunts", "%\tid\tbus\tGs\tBs", "mpc.shunt = ["]
    for shunt in net.shunts:
        lines.append(_row([shunt.id, shunt.bus, shunt.gs * base, shunt.bs * base]))
    lines.append("];")
    if any(br.i_max is not None for br in net.branches):
        lines += ["", "%% branch current limits (p.u.)", "mpc.branch_imax = ["]
        lines += [_row([br.i_max if br.i_max is not None else 0.0]) for br in net.branches]
        lines.append("];")
    return "\n".join(lines) + "\n"


def resolve_case_path(case: str | Path) -> Path:
    """Resolve a case argument: an existing path, or a bundled case name."""
    path = Path(case)
    if path.is_file():
        return path
    for candidate in (config.CASES_DIR / path.name, config.CASES_DIR / f"{path.name}.m"):
        if candidate.is_file():
            return candidate
    error = f"case file not found: {case}"
    logger.error(error)
    raise FileNotFoundError(error)


def load_case(case: str | Path) -> Network:
    path = resolve_case_path(case)
    return parse_case(path.read_text(encoding="utf-8"), name=path.stem)


def bundled_cases() -> list[Path]:
    return sorted(config.CASES_DIR.glob("*.m"))
