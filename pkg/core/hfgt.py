"""
Hetero-functional incidence tensors and matrices.

Workflow:
1. build_hfit: negative (pulls) and positive (injections) tensors over
   operand x buffer x capability
2. matricize: M = M+ - M-, rows operand-major over (operand, buffer)
3. eliminate_zero_rows: drop the all-zero rows of M
4. partition: split rows into products (A) and environmental aspects (B)
"""

import json
import logging
from dataclasses import dataclass, field
import numpy as np
import pandas as pd
from scipy import sparse
from core.errors import ModelError, PartitionError
from core.system_model import SystemModel, enumerate_buffers

logger = logging.getLogger(__name__)

NEGATIVE = "negative"
POSITIVE = "positive"


# ============================================================
# Domain types
# ============================================================
@dataclass(frozen=True)
class IncidenceTensor:
    sign: str
    operand_ids: tuple[str, ...]
    buffer_ids: tuple[str, ...]
    capability_ids: tuple[str, ...]
    entries: dict = field(default_factory=dict)  # (i, y, psi) -> weight > 0

    @property
    def shape(self) -> tuple[int, int, int]:
        return (len(self.operand_ids), len(self.buffer_ids), len(self.capability_ids))


@dataclass(frozen=True)
class IncidenceMatrix:
    values: sparse.csr_matrix
    row_map: tuple[tuple[str, str], ...]
    col_map: tuple[str, ...]
    reduced: bool = False
    plus: sparse.csr_matrix | None = None
    minus: sparse.csr_matrix | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def dense(self) -> np.ndarray:
        return self.values.toarray()

    def row_index(self, operand: str, buffer: str) -> int:
        try:
            return self.row_map.index((operand, buffer))
        except ValueError:
            raise ModelError(f"no row for place {operand} @ {buffer}") from None

    def col_index(self, capability: str) -> int:
        try:
            return self.col_map.index(capability)
        except ValueError:
            raise ModelError(f"no column for capability '{capability}'") from None


@dataclass(frozen=True)
class PartitionedMatrix:
    A: np.ndarray
    B: np.ndarray
    product_rows: tuple[int, ...]
    aspect_rows: tuple[int, ...]
    product_map: tuple[tuple[str, str], ...]
    aspect_map: tuple[tuple[str, str], ...]
    col_map: tuple[str, ...]

    def reassemble(self) -> np.ndarray:
        """Rebuild the reduced matrix M from A and B using the stored row indices."""
        n_rows = len(self.product_rows) + len(self.aspect_rows)
        m = np.zeros((n_rows, len(self.col_map)))
        m[list(self.product_rows), :] = self.A
        m[list(self.aspect_rows), :] = self.B
        return m

    def aspect_index(self, operand: str, buffer: str | None = None) -> int:
        """Index into B of the aspect row for an operand (first match if buffer omitted)."""
        for idx, (op, buf) in enumerate(self.aspect_map):
            if op == operand and (buffer is None or buf == buffer):
                return idx
        raise ModelError(f"no aspect row for operand '{operand}'")

    def product_index(self, operand: str, buffer: str | None = None) -> int:
        for idx, (op, buf) in enumerate(self.product_map):
            if op == operand and (buffer is None or buf == buffer):
                return idx
        raise ModelError(f"no product row for operand '{operand}'")


# ============================================================
# Construction
# ============================================================
def build_hfit(model: SystemModel, sign: str) -> IncidenceTensor:
    """
    Build the negative or positive hetero-functional incidence tensor.

    Args:
        model: Validated system model
        sign: "negative" (pulls) or "positive" (injections)

    Returns:
        IncidenceTensor with weight = |rate| for flows of the requested sign
    """
    if sign not in (NEGATIVE, POSITIVE):
        raise ValueError(f"sign must be '{NEGATIVE}' or '{POSITIVE}', got '{sign}'")

    buffers = enumerate_buffers(model)
    operand_idx = {o.id: i for i, o in enumerate(model.operands)}
    buffer_idx = {b.id: y for y, b in enumerate(buffers)}
    resources = {r.id: r for r in model.resources}

    entries: dict[tuple[int, int, int], float] = {}
    for psi, cap in enumerate(model.capabilities):
        for flow in cap.flows:
            if flow.buffer not in buffer_idx:
                kind = resources[flow.buffer].kind if flow.buffer in resources else "undeclared"
                raise ModelError(
                    f"capability '{cap.id}' has a flow at '{flow.buffer}' ({kind}), which is not a buffer"
                )
            if flow.operand not in operand_idx:
                raise ModelError(f"capability '{cap.id}' references undeclared operand '{flow.operand}'")

            if (sign == NEGATIVE and flow.rate < 0) or (sign == POSITIVE and flow.rate > 0):
                key = (operand_idx[flow.operand], buffer_idx[flow.buffer], psi)
                entries[key] = entries.get(key, 0.0) + abs(flow.rate)

    return IncidenceTensor(
        sign=sign,
        operand_ids=tuple(o.id for o in model.operands),
        buffer_ids=tuple(b.id for b in buffers),
        capability_ids=tuple(c.id for c in model.capabilities),
        entries=entries,
    )


def _tensor_to_sparse(tensor: IncidenceTensor) -> sparse.csr_matrix:
    n_ops, n_bufs, n_caps = tensor.shape
    rows, cols, data = [], [], []
    for (i, y, psi), weight in tensor.entries.items():
        rows.append(i * n_bufs + y)
        cols.append(psi)
        data.append(weight)
    return sparse.coo_matrix(
        (np.asarray(data, dtype=np.float64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(n_ops * n_bufs, n_caps),
    ).tocsr()


def matricize(neg: IncidenceTensor, pos: IncidenceTensor) -> IncidenceMatrix:
    """
    Matricize the tensor pair into M = M+ - M-.

    Rows are operand-major over (operand, buffer) in declaration order.
    """
    if neg.sign != NEGATIVE or pos.sign != POSITIVE:
        raise ModelError("matricize expects (negative, positive) tensors")
    if (
        neg.operand_ids != pos.operand_ids
        or neg.buffer_ids != pos.buffer_ids
        or neg.capability_ids != pos.capability_ids
    ):
        raise ModelError(f"dimension mismatch between tensors: {neg.shape} vs {pos.shape}")

    minus = _tensor_to_sparse(neg)
    plus = _tensor_to_sparse(pos)
    values = (plus - minus).tocsr()
    values.eliminate_zeros()

    row_map = tuple((op, buf) for op in neg.operand_ids for buf in neg.buffer_ids)
    return IncidenceMatrix(
        values=values,
        row_map=row_map,
        col_map=neg.capability_ids,
        reduced=False,
        plus=plus,
        minus=minus,
    )


def eliminate_zero_rows(m: IncidenceMatrix) -> IncidenceMatrix:
    """
    Drop the all-zero rows of M.

    A place that one capability pulls from and re-injects into in equal
    measure nets to zero and is dropped with the untouched places.
    """
    if m.reduced:
        logger.debug("Matrix already reduced; re-scanning rows anyway")

    values = m.values.tocsr().copy()
    values.eliminate_zeros()
    keep = np.diff(values.indptr) > 0
    kept_idx = np.flatnonzero(keep)

    logger.debug("Eliminated %d zero rows of %d", m.shape[0] - len(kept_idx), m.shape[0])
    return IncidenceMatrix(
        values=values[kept_idx, :].tocsr(),
        row_map=tuple(m.row_map[i] for i in kept_idx),
        col_map=m.col_map,
        reduced=True,
        plus=m.plus[kept_idx, :].tocsr() if m.plus is not None else None,
        minus=m.minus[kept_idx, :].tocsr() if m.minus is not None else None,
    )


def build_incidence_matrix(model: SystemModel, reduce: bool = True) -> IncidenceMatrix:
    """Tensors -> matricize -> (optionally) eliminate zero rows."""
    m = matricize(build_hfit(model, NEGATIVE), build_hfit(model, POSITIVE))
    return eliminate_zero_rows(m) if reduce else m


def partition(m: IncidenceMatrix, aspect_operands) -> PartitionedMatrix:
    """
    Split a reduced incidence matrix into product rows (A) and aspect rows (B).

    Args:
        m: Reduced incidence matrix
        aspect_operands: Operand ids whose rows are environmental aspects

    Returns:
        PartitionedMatrix with stable row ordering

    Raises:
        PartitionError: matrix not reduced, or A not square
    """
    if not m.reduced:
        raise PartitionError("partition requires a reduced matrix (eliminate zero rows first)")

    aspects = set(aspect_operands)
    known = {op for op, _ in m.row_map}
    unknown = sorted(aspects - known)
    if unknown:
        logger.warning("Aspect operands with no rows in the matrix: %s", ", ".join(unknown))

    product_rows = [i for i, (op, _) in enumerate(m.row_map) if op not in aspects]
    aspect_rows = [i for i, (op, _) in enumerate(m.row_map) if op in aspects]

    n_cols = m.shape[1]
    if len(product_rows) != n_cols:
        raise PartitionError(f"A not square ({len(product_rows)} rows, {n_cols} columns)")

    dense = m.dense()
    return PartitionedMatrix(
        A=dense[product_rows, :],
        B=dense[aspect_rows, :].reshape(len(aspect_rows), n_cols),
        product_rows=tuple(product_rows),
        aspect_rows=tuple(aspect_rows),
        product_map=tuple(m.row_map[i] for i in product_rows),
        aspect_map=tuple(m.row_map[i] for i in aspect_rows),
        col_map=m.col_map,
    )


# ============================================================
# Export
# ============================================================
def matrix_frame(m: IncidenceMatrix) -> pd.DataFrame:
    """Matrix as a DataFrame: operand, buffer, then one column per capability."""
    frame = pd.DataFrame(m.dense(), columns=list(m.col_map))
    frame.insert(0, "buffer", [buf for _, buf in m.row_map])
    frame.insert(0, "operand", [op for op, _ in m.row_map])
    return frame


def export_matrix_csv(m: IncidenceMatrix, path: str) -> str:
    matrix_frame(m).to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path


def export_matrix_json(m: IncidenceMatrix, path: str) -> str:
    payload = {
        "reduced": m.reduced,
        "shape": list(m.shape),
        "row_map": [list(pair) for pair in m.row_map],
        "col_map": list(m.col_map),
        "values": m.dense().tolist(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
    return path
