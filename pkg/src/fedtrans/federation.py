"""Sites, summary-statistic messages, wire codec, and the communication ledger.

Sites only ever release gradients and Hessians of their local losses.  Every
message travels through ``encode_message``/``decode_message`` and is counted in
a ``CommLedger`` before the coordinator sees it.

Wire format (little endian), 40-byte header followed by float64 payload::

    magic "FTLM" | version u16 | msg_type u8 | site_id u32 | population_id u32
    | p u32 | n_local u64 | anchor_digest u64 | 5 reserved zero bytes

Gradient payloads carry p entries, Hessian payloads the lower triangle in
row-major order, p(p+1)/2 entries.
"""
from __future__ import annotations

import json
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from .glm import GlmFamily, PartitionedDataset, grad_rows, hess_rows, nll_rows

MAGIC = b"FTLM"
VERSION = 1
GRADIENT, HESSIAN = 1, 2
_HEADER = struct.Struct("<4sHBIIIQQ5x")
HEADER_SIZE = _HEADER.size  # 40

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


class ProtocolError(ValueError):
    pass


class DecodeError(ProtocolError):
    def __init__(self, field_name: str, detail: str):
        super().__init__(f"{field_name}: {detail}")
        self.field = field_name


class StaleAnchorError(ProtocolError):
    pass


class EmptyPopulationError(ProtocolError):
    pass


def anchor_digest(anchor) -> int:
    """64-bit FNV-1a over the anchor's little-endian float64 bytes."""
    data = np.ascontiguousarray(anchor, dtype="<f8").tobytes()
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def pack_lower(H) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    return H[np.tril_indices(H.shape[0])]


def unpack_lower(packed, p: int) -> np.ndarray:
    packed = np.asarray(packed, dtype=float)
    if packed.shape[0] != p * (p + 1) // 2:
        raise ValueError(f"packed length {packed.shape[0]} != p(p+1)/2 for p={p}")
    H = np.zeros((p, p))
    H[np.tril_indices(p)] = packed
    return H + np.tril(H, -1).T


@dataclass(frozen=True)
class GradientMessage:
    site_id: int
    population_id: int
    anchor_digest: int
    n_local: int
    payload: np.ndarray = field(repr=False)

    msg_type = GRADIENT

    @property
    def p(self) -> int:
        return len(self.payload)

    def __eq__(self, other):
        return (
            type(other) is type(self)
            and (self.site_id, self.population_id, self.anchor_digest, self.n_local)
            == (other.site_id, other.population_id, other.anchor_digest, other.n_local)
            and np.array_equal(self.payload, other.payload)
        )


@dataclass(frozen=True)
class HessianMessage:
    site_id: int
    population_id: int
    anchor_digest: int
    n_local: int
    p: int
    payload: np.ndarray = field(repr=False)  # packed lower triangle

    msg_type = HESSIAN

    def matrix(self) -> np.ndarray:
        return unpack_lower(self.payload, self.p)

    def __eq__(self, other):
        return (
            type(other) is type(self)
            and (self.site_id, self.population_id, self.anchor_digest, self.n_local, self.p)
            == (other.site_id, other.population_id, other.anchor_digest, other.n_local, other.p)
            and np.array_equal(self.payload, other.payload)
        )


Message = Union[GradientMessage, HessianMessage]


def payload_size(msg_type: int, p: int) -> int:
    if msg_type == GRADIENT:
        return 8 * p
    return 8 * (p * (p + 1) // 2)


def encode_message(msg: Message) -> bytes:
    p = msg.p
    header = _HEADER.pack(
        MAGIC, VERSION, msg.msg_type, msg.site_id, msg.population_id, p,
        msg.n_local, msg.anchor_digest,
    )
    return header + np.ascontiguousarray(msg.payload, dtype="<f8").tobytes()


def decode_message(buf: bytes) -> Message:
    if len(buf) < HEADER_SIZE:
        raise DecodeError("header", f"truncated: {len(buf)} bytes, need {HEADER_SIZE}")
    magic, version, mtype, site, pop, p, n_local, digest = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise DecodeError("magic", f"expected {MAGIC!r}, got {magic!r}")
    if version != VERSION:
        raise DecodeError("version", f"unsupported version {version}")
    if buf[35:HEADER_SIZE] != b"\x00" * 5:
        raise DecodeError("reserved", "reserved bytes must be zero")
    if mtype not in (GRADIENT, HESSIAN):
        raise DecodeError("msg_type", f"unknown message type {mtype}")
    need = payload_size(mtype, p)
    body = buf[HEADER_SIZE:]
    if len(body) != need:
        raise DecodeError("payload", f"expected {need} bytes for p={p}, got {len(body)}")
    payload = np.frombuffer(body, dtype="<f8").astype(float)
    if mtype == GRADIENT:
        return GradientMessage(site, pop, digest, n_local, payload)
    return HessianMessage(site, pop, digest, n_local, p, payload)


def header_record(buf: bytes) -> dict:
    """Header fields as a JSON-ready dict (no payload)."""
    magic, version, mtype, site, pop, p, n_local, digest = _HEADER.unpack_from(buf)
    return {
        "magic": magic.decode("ascii", "replace"),
        "version": version,
        "msg_type": "gradient" if mtype == GRADIENT else "hessian",
        "site_id": site,
        "population_id": pop,
        "p": p,
        "n_local": n_local,
        "anchor_digest": f"{digest:016x}",
        "bytes": len(buf),
    }


class CommLedger:
    """Byte and message counts per round, site, and message type."""

    def __init__(self):
        self._rows = []  # (round, site, msg_type, header_bytes, payload_bytes)

    def record(self, round_index: int, site_id: int, msg_type: int, nbytes: int):
        self._rows.append((round_index, site_id, msg_type, HEADER_SIZE, nbytes - HEADER_SIZE))

    @property
    def total_bytes(self) -> int:
        return sum(h + b for _, _, _, h, b in self._rows)

    @property
    def rounds(self) -> list[int]:
        return sorted({r for r, *_ in self._rows})

    def rows(self):
        return list(self._rows)

    def report(self) -> dict:
        return ledger_report(self)


def _blank_counts():
    return {
        "gradient_messages": 0, "hessian_messages": 0,
        "gradient_bytes": 0, "hessian_bytes": 0,
        "gradient_payload_bytes": 0, "hessian_payload_bytes": 0,
        "header_bytes": 0, "total_bytes": 0,
    }


def _add(acc, mtype, header, payload):
    kind = "gradient" if mtype == GRADIENT else "hessian"
    acc[f"{kind}_messages"] += 1
    acc[f"{kind}_bytes"] += header + payload
    acc[f"{kind}_payload_bytes"] += payload
    acc["header_bytes"] += header
    acc["total_bytes"] += header + payload


def ledger_report(ledger: Optional[CommLedger]) -> dict:
    """Totals per round, per site within round, and overall."""
    total = _blank_counts()
    per_round = defaultdict(_blank_counts)
    per_site = defaultdict(lambda: defaultdict(_blank_counts))
    for r, site, mtype, h, b in ([] if ledger is None else ledger.rows()):
        _add(total, mtype, h, b)
        _add(per_round[r], mtype, h, b)
        _add(per_site[r][site], mtype, h, b)
    return {
        "total": total,
        "rounds": {r: dict(per_round[r]) for r in sorted(per_round)},
        "sites": {r: {s: dict(c) for s, c in sorted(per_site[r].items())} for r in sorted(per_site)},
    }


class SiteNode:
    """One site's private data.  Only summary statistics leave the object."""

    def __init__(self, site_id: int, X, y, pop_of, family: GlmFamily):
        self.site_id = int(site_id)
        self.family = family
        X = np.asarray(X, dtype=float)
        y = family.check_response(y)
        pop_of = np.asarray(pop_of, dtype=np.int64)
        self._cells = {}
        for k in sorted(int(v) for v in np.unique(pop_of)):
            rows = np.flatnonzero(pop_of == k)
            self._cells[k] = (np.ascontiguousarray(X[rows]), y[rows].copy())
        self.p = X.shape[1]

    @classmethod
    def from_dataset(cls, data: PartitionedDataset, site_id: int, family: GlmFamily):
        rows = data.site_rows(site_id)
        return cls(site_id, data.X[rows], data.y[rows], data.pop_of[rows], family)

    @property
    def populations(self) -> list[int]:
        return sorted(self._cells)

    def n_local(self, pop: int) -> int:
        cell = self._cells.get(pop)
        return 0 if cell is None else len(cell[1])

    def counts(self) -> dict:
        """Cell sizes; treated as public metadata."""
        return {k: self.n_local(k) for k in self.populations}

    def compute(self, anchors: dict, want_hessian: bool, populations: Optional[Iterable[int]] = None) -> list:
        """Gradient (and optionally Hessian) messages for each held population."""
        pops = self.populations if populations is None else [k for k in populations if k in self._cells]
        msgs = []
        for k in pops:
            if k not in anchors:
                raise ProtocolError(f"site {self.site_id}: no anchor for population {k}")
            b = np.asarray(anchors[k], dtype=float)
            if b.shape[0] != self.p:
                raise ProtocolError(f"site {self.site_id}: anchor length {b.shape[0]} != p={self.p}")
            X, y = self._cells[k]
            if len(y) == 0:
                continue
            dig = anchor_digest(b)
            msgs.append(GradientMessage(self.site_id, k, dig, len(y), grad_rows(self.family, X, y, b)))
            if want_hessian:
                msgs.append(HessianMessage(self.site_id, k, dig, len(y), self.p,
                                           pack_lower(hess_rows(self.family, X, b))))
        return msgs

    # Local model fitting at the site itself (initialization, validation).
    def local_data(self, populations=None) -> PartitionedDataset:
        pops = self.populations if populations is None else [k for k in populations if k in self._cells]
        Xs = [self._cells[k][0] for k in pops]
        ys = [self._cells[k][1] for k in pops]
        pop_of = np.concatenate([np.full(len(self._cells[k][1]), k) for k in pops]) if pops else np.zeros(0, int)
        X = np.vstack(Xs) if Xs else np.zeros((0, self.p))
        y = np.concatenate(ys) if ys else np.zeros(0)
        return PartitionedDataset(X, y, np.full(len(y), self.site_id), pop_of)

    def local_hessian(self, pop: int, b) -> np.ndarray:
        """Normalized Hessian of one local cell; stays on this site."""
        X, _ = self._cells[pop]
        return hess_rows(self.family, X, np.asarray(b, dtype=float)) / len(X)

    def local_log_lik(self, b, pop: int = 0) -> float:
        X, y = self._cells[pop]
        return -nll_rows(self.family, X, y, np.asarray(b, dtype=float))


def site_compute(site: SiteNode, anchors: dict, want_hessian: bool) -> list:
    return site.compute(anchors, want_hessian)


@dataclass
class QuadraticSurrogate:
    """R(b; anchor) = 0.5 (b-a)'H(b-a) + <b-a, g> for normalized g and H."""

    anchor: np.ndarray
    grad_combined: np.ndarray
    hessian_avg: np.ndarray
    n_total: int

    def value(self, b) -> float:
        d = np.asarray(b, dtype=float) - self.anchor
        return 0.5 * float(d @ self.hessian_avg @ d) + float(d @ self.grad_combined)

    def gradient(self, b) -> np.ndarray:
        d = np.asarray(b, dtype=float) - self.anchor
        return self.hessian_avg @ d + self.grad_combined

    def shifted(self, offset) -> "QuadraticSurrogate":
        """Surrogate of b -> R(b + offset); exact for a quadratic."""
        return QuadraticSurrogate(self.anchor - np.asarray(offset, dtype=float),
                                  self.grad_combined, self.hessian_avg, self.n_total)

    def coefficients(self):
        """(A, q, c) with R(b) = 0.5 b'Ab + q'b + c."""
        A = self.hessian_avg
        Aa = A @ self.anchor
        q = self.grad_combined - Aa
        c = 0.5 * float(self.anchor @ Aa) - float(self.anchor @ self.grad_combined)
        return A, q, c


def combine_surrogate(msgs: Iterable[Message], anchor, hessian=None) -> QuadraticSurrogate:
    """Average the gradients (and Hessians) of one population at one anchor.

    Gradient sums are normalized by the total count across gradient messages.
    Hessians are summed over the Hessian messages present and normalized by
    their own counts; ``hessian`` overrides them with a supplied average (the
    local-Hessian variant).
    """
    msgs = sorted(msgs, key=lambda m: (m.site_id, m.msg_type))
    if not msgs:
        raise EmptyPopulationError("no messages to combine")
    anchor = np.asarray(anchor, dtype=float)
    dig = anchor_digest(anchor)
    pops = {m.population_id for m in msgs}
    if len(pops) != 1:
        raise ProtocolError(f"messages mix populations {sorted(pops)}")
    p = anchor.shape[0]
    g = np.zeros(p)
    H = np.zeros((p, p))
    n_g = n_h = 0
    for m in msgs:
        if m.anchor_digest != dig:
            raise StaleAnchorError(
                f"site {m.site_id} population {m.population_id}: digest {m.anchor_digest:016x} "
                f"does not match broadcast anchor {dig:016x}"
            )
        if m.p != p:
            raise ProtocolError(f"site {m.site_id}: payload dimension {m.p} != {p}")
        if m.msg_type == GRADIENT:
            g = g + m.payload
            n_g += m.n_local
        else:
            H = H + m.matrix()
            n_h += m.n_local
    if n_g == 0:
        raise EmptyPopulationError(f"population {pops.pop()} has no samples")
    if hessian is not None:
        H_avg = np.asarray(hessian, dtype=float)
    elif n_h == 0:
        raise ProtocolError("no Hessian messages and no Hessian supplied")
    else:
        H_avg = H / n_h
    return QuadraticSurrogate(anchor.copy(), g / n_g, H_avg, n_g)


def merge_surrogates(parts: list) -> QuadraticSurrogate:
    """Count-weighted sum of surrogates sharing an anchor (pools populations)."""
    if not parts:
        raise EmptyPopulationError("nothing to merge")
    anchor = parts[0].anchor
    for s in parts[1:]:
        if not np.array_equal(s.anchor, anchor):
            raise StaleAnchorError("surrogates to merge have different anchors")
    n = sum(s.n_total for s in parts)
    g = sum(s.n_total * s.grad_combined for s in parts) / n
    H = sum(s.n_total * s.hessian_avg for s in parts) / n
    return QuadraticSurrogate(anchor.copy(), g, H, n)


class Network:
    """In-process transport between sites and the coordinator.

    ``gather`` broadcasts anchors, lets each site compute, pushes every message
    through the codec, and ledgers the encoded bytes.  The coordinator only
    receives decoded messages.
    """

    def __init__(self, sites: list, leading_site: Optional[int] = None, ledger: Optional[CommLedger] = None,
                 debug_log=None):
        self.sites = sorted(sites, key=lambda s: s.site_id)
        ids = [s.site_id for s in self.sites]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate site ids {ids}")
        self.leading_site = ids[0] if leading_site is None else int(leading_site)
        if self.leading_site not in ids:
            raise ValueError(f"leading site {self.leading_site} not among {ids}")
        self.ledger = CommLedger() if ledger is None else ledger
        self.debug_log = debug_log
        self.p = self.sites[0].p
        self.round = 0

    @property
    def leader(self) -> SiteNode:
        return self.site(self.leading_site)

    def site(self, site_id: int) -> SiteNode:
        for s in self.sites:
            if s.site_id == site_id:
                return s
        raise KeyError(site_id)

    def census(self) -> dict:
        """{site_id: {population: count}} (public metadata)."""
        return {s.site_id: s.counts() for s in self.sites}

    def population_total(self, pop: int) -> int:
        return sum(s.n_local(pop) for s in self.sites)

    def next_round(self) -> int:
        self.round += 1
        return self.round

    def _transmit(self, msg) -> Message:
        buf = encode_message(msg)
        self.ledger.record(self.round, msg.site_id, msg.msg_type, len(buf))
        if self.debug_log is not None:
            self.debug_log.write(json.dumps({"round": self.round, **header_record(buf)}) + "\n")
        return decode_message(buf)

    def gather(self, anchors: dict, hessian_sites="all", populations=None) -> dict:
        """Run one exchange and group decoded messages by population.

        ``hessian_sites`` is "all", "none", or a collection of site ids that
        also send Hessians.
        """
        out = defaultdict(list)
        for s in self.sites:
            if hessian_sites == "all":
                want = True
            elif hessian_sites == "none":
                want = False
            else:
                want = s.site_id in hessian_sites
            held = {k: anchors[k] for k in s.populations if k in anchors and
                    (populations is None or k in populations)}
            need = [k for k in s.populations if populations is None or k in populations]
            missing = [k for k in need if k not in anchors]
            if missing:
                raise ProtocolError(f"no anchor broadcast for populations {missing}")
            for msg in s.compute(held, want, populations=need):
                out[msg.population_id].append(self._transmit(msg))
        return dict(out)
