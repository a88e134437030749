"""
Grid-mix binding of the partitioned incidence matrix.

The model's mix capability (the power line) pulls electricity from every
generation place and delivers one unit to the electrolyzer per firing.
For each hour its pulls are replaced by that hour's generation shares, so

    emissions per kg product = B[emission] . A(shares)^-1 . e_product

Model metadata used:
    lca_aspects        operands partitioned into B
    product_operand    operand whose row carries dY
    emission_operand   operand whose B row is reported as emissions
    emission_scale     multiplier from the emission unit to kg (g -> 0.001)
    mix_capability     capability whose pulls carry the hourly mix
    mix_operand        operand the mix capability moves
    source.<name>      canonical source -> generation capability
"""

import logging
from dataclasses import dataclass, replace
import numpy as np
from core.errors import ModelError, NumericalError
from core.esn import MAX_CONDITION, steady_state_lca
from core.hfgt import PartitionedMatrix, build_incidence_matrix, partition
from core.system_model import SystemModel

logger = logging.getLogger(__name__)

SHARE_TOLERANCE = 1e-9


def _split_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


@dataclass(frozen=True)
class GridLCAModel:
    part: PartitionedMatrix
    sources: tuple[str, ...]
    source_caps: tuple[str, ...]
    source_rows: tuple[int, ...]
    mix_col: int
    product_row: int
    emission_row: int
    emission_scale: float = 1.0

    @property
    def specific_energy(self) -> float:
        """Mix-operand draw per unit product of the producing capability."""
        prod_col = int(np.flatnonzero(self.part.A[self.product_row] > 0)[0])
        delivery = [r for r in range(self.part.A.shape[0]) if self.part.A[r, self.mix_col] > 0]
        return float(-self.part.A[delivery[0], prod_col])

    def normalize_shares(self, shares) -> np.ndarray:
        """
        Share vector in `sources` order, checked to be non-negative and to sum to 1.

        Args:
            shares: Mapping source -> share, or a sequence in `sources` order
        """
        if isinstance(shares, dict):
            unknown = sorted(set(shares) - set(self.sources))
            if unknown:
                raise NumericalError(f"shares for unknown sources: {', '.join(unknown)}")
            vec = np.array([float(shares.get(s, 0.0)) for s in self.sources])
        else:
            vec = np.asarray(shares, dtype=np.float64).ravel()
            if vec.shape != (len(self.sources),):
                raise NumericalError(f"expected {len(self.sources)} shares, got {vec.size}")

        if (vec < 0).any():
            raise NumericalError("generation shares must be non-negative")
        total = vec.sum()
        if abs(total - 1.0) > SHARE_TOLERANCE:
            raise NumericalError(f"generation shares sum to {total:.12g}, expected 1")
        return vec

    def _mix_column(self, shares: np.ndarray) -> np.ndarray:
        col = self.part.A[:, self.mix_col].copy()
        col[list(self.source_rows)] = 0.0
        np.add.at(col, list(self.source_rows), -shares)
        return col

    def apply_mix(self, shares) -> PartitionedMatrix:
        """Partitioned matrix whose mix column pulls the given shares."""
        vec = self.normalize_shares(shares)
        A = self.part.A.copy()
        A[:, self.mix_col] = self._mix_column(vec)
        return replace(self.part, A=A)

    def product_vector(self, amount: float) -> np.ndarray:
        delta_y = np.zeros(self.part.A.shape[0])
        delta_y[self.product_row] = amount
        return delta_y

    def emission_factors(self) -> dict[str, float]:
        """Emission row entry of each source's generation column (emission unit per firing)."""
        return {
            source: float(self.part.B[self.emission_row, self.part.col_map.index(cap)])
            for source, cap in zip(self.sources, self.source_caps)
        }

    def emission_row_matches(self, ef_table, tol: float = 1e-9) -> bool:
        """True when the emission row over generation columns equals the EF table."""
        row = self.emission_factors()
        mismatched = [s for s in self.sources if abs(row[s] - ef_table.factor(s)) > tol]
        if mismatched:
            logger.debug("Emission row differs from EF table for: %s", ", ".join(mismatched))
        return not mismatched

    def emissions_per_unit(self, shares) -> float:
        """kg of emission operand per unit product for one mix, via the LCA solve."""
        result = steady_state_lca(self.apply_mix(shares), self.product_vector(1.0))
        return float(result.delta_e[self.emission_row]) * self.emission_scale

    def emissions_per_unit_batch(self, shares: np.ndarray) -> np.ndarray:
        """
        Batched version of emissions_per_unit for an (n_hours, n_sources) share matrix.

        Every row must satisfy the share invariants; one linear solve per hour.
        """
        shares = np.atleast_2d(np.asarray(shares, dtype=np.float64))
        n_hours = shares.shape[0]
        if n_hours == 0:
            return np.zeros(0)
        if shares.shape[1] != len(self.sources):
            raise NumericalError(f"expected {len(self.sources)} share columns, got {shares.shape[1]}")
        if (shares < 0).any():
            raise NumericalError("generation shares must be non-negative")
        bad = np.flatnonzero(np.abs(shares.sum(axis=1) - 1.0) > SHARE_TOLERANCE)
        if bad.size:
            raise NumericalError(f"generation shares of hour {bad[0]} sum to {shares[bad[0]].sum():.12g}, expected 1")

        n = self.part.A.shape[0]
        stack = np.broadcast_to(self.part.A, (n_hours, n, n)).copy()
        base = self.part.A[:, self.mix_col].copy()
        base[list(self.source_rows)] = 0.0
        stack[:, :, self.mix_col] = base
        for k, row in enumerate(self.source_rows):
            stack[:, row, self.mix_col] -= shares[:, k]

        conditions = np.linalg.cond(stack)
        bad = np.flatnonzero(~np.isfinite(conditions) | (conditions > MAX_CONDITION))
        if bad.size:
            raise NumericalError(
                f"A is singular or ill-conditioned for hour {bad[0]} "
                f"(condition estimate {conditions[bad[0]]:.3e})"
            )

        rhs = np.zeros((n_hours, n, 1))
        rhs[:, self.product_row, 0] = 1.0
        firing = np.linalg.solve(stack, rhs)[..., 0]
        if (firing < -1e-12).any():
            logger.warning("Negative firing in %d hourly solves", int((firing < -1e-12).any(axis=1).sum()))

        return (firing @ self.part.B[self.emission_row]) * self.emission_scale


def build_grid_model(model: SystemModel, specific_energy: float | None = None) -> GridLCAModel:
    """
    Bind a system model to the hourly grid mix using its metadata.

    Args:
        model: System model carrying the metadata keys listed in the module docstring
        specific_energy: Overrides the producing capability's mix-operand draw per unit

    Returns:
        GridLCAModel ready for per-hour emission solves
    """
    meta = model.metadata
    for key in ("lca_aspects", "product_operand", "emission_operand", "mix_capability", "mix_operand"):
        if not meta.get(key):
            raise ModelError(f"model metadata is missing '{key}'")

    source_map = {
        key.split(".", 1)[1]: value for key, value in meta.items() if key.startswith("source.")
    }
    if not source_map:
        raise ModelError("model metadata declares no 'source.<name>' capabilities")

    part = partition(build_incidence_matrix(model), _split_list(meta["lca_aspects"]))
    mix_operand = meta["mix_operand"]
    mix_cap = meta["mix_capability"]
    if mix_cap not in part.col_map:
        raise ModelError(f"mix capability '{mix_cap}' is not a matrix column")
    mix_col = part.col_map.index(mix_cap)

    sources, caps, rows = [], [], []
    for source, cap_id in source_map.items():
        cap = model.capability(cap_id)
        outputs = [f for f in cap.flows if f.operand == mix_operand and f.rate > 0]
        if not outputs:
            raise ModelError(f"source capability '{cap_id}' injects no '{mix_operand}'")
        place = (mix_operand, outputs[0].buffer)
        if place not in part.product_map:
            raise ModelError(f"place {place[0]} @ {place[1]} of source '{source}' is not a product row")
        sources.append(source)
        caps.append(cap_id)
        rows.append(part.product_map.index(place))

    product_row = part.product_index(meta["product_operand"])
    emission_row = part.aspect_index(meta["emission_operand"])

    if specific_energy is not None:
        producers = np.flatnonzero(part.A[product_row] > 0)
        deliveries = np.flatnonzero(part.A[:, mix_col] > 0)
        if producers.size != 1 or deliveries.size != 1:
            raise ModelError("cannot locate a single producing capability to set the specific energy")
        A = part.A.copy()
        A[deliveries[0], producers[0]] = -float(specific_energy)
        part = replace(part, A=A)

    grid = GridLCAModel(
        part=part,
        sources=tuple(sources),
        source_caps=tuple(caps),
        source_rows=tuple(rows),
        mix_col=mix_col,
        product_row=product_row,
        emission_row=emission_row,
        emission_scale=float(meta.get("emission_scale", "1")),
    )
    logger.debug("Grid model: %d sources, mix column '%s'", len(sources), mix_cap)
    return grid
