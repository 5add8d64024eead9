"""Dated return matrix shared by every stage of the pipeline."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, InvalidInputError


@dataclass
class ReturnPanel:
    """Rows are dates (or sample ids), columns are assets.

    Attributes
    ----------
    values : ndarray (n, d)
    asset_ids : list of str, unique
    dates : list of str, nondecreasing when they are real dates
    market_cap : ndarray (n, d) or None
        Optional sidecar used by value weighting.
    mask : ndarray of bool (n, d) or None
        Where values were missing before filling, if the panel was filled.
    """

    values: np.ndarray
    asset_ids: list = None
    dates: list = None
    market_cap: np.ndarray = None
    mask: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise InvalidInputError("panel values must be a 2-D array")
        n, d = self.values.shape
        if self.asset_ids is None:
            self.asset_ids = [f"a{j}" for j in range(d)]
        if self.dates is None:
            self.dates = [str(i) for i in range(n)]
        self.asset_ids = [str(a) for a in self.asset_ids]
        self.dates = [str(x) for x in self.dates]
        if len(self.asset_ids) != d or len(set(self.asset_ids)) != d:
            raise InvalidInputError("asset ids must be unique, one per column")
        if len(self.dates) != n:
            raise InvalidInputError("need one date per row")
        if self.market_cap is not None:
            self.market_cap = np.asarray(self.market_cap, dtype=np.float64)
            if self.market_cap.shape != self.values.shape:
                raise InvalidInputError("market-cap sidecar must match the value matrix")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.values.shape:
                raise InvalidInputError("missing-value mask must match the value matrix")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    @property
    def missing(self):
        return ~np.isfinite(self.values)

    def _sub(self, arr, index):
        return None if arr is None else arr[index]

    def rows(self, sl):
        idx = range(self.n)[sl]
        return ReturnPanel(
            self.values[sl],
            list(self.asset_ids),
            [self.dates[i] for i in idx],
            self._sub(self.market_cap, sl),
            self._sub(self.mask, sl),
            dict(self.meta),
        )

    def columns(self, keep):
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.nonzero(keep)[0]
        index = (slice(None), keep)
        return ReturnPanel(
            self.values[index],
            [self.asset_ids[j] for j in keep],
            list(self.dates),
            self._sub(self.market_cap, index),
            self._sub(self.mask, index),
            dict(self.meta),
        )

    def to_csv(self, path, date_header="date"):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([date_header, *self.asset_ids])
            for date, row in zip(self.dates, self.values):
                w.writerow([date, *(repr(float(x)) for x in row)])


def as_values(panel):
    """Accept a :class:`ReturnPanel` or an array and return the float matrix."""
    if isinstance(panel, ReturnPanel):
        return panel.values
    out = np.asarray(panel, dtype=np.float64)
    if out.ndim != 2:
        raise InvalidInputError("expected an (n, d) return matrix")
    return out


def read_panel_csv(path, date_column=True):
    """Read a panel written by :meth:`ReturnPanel.to_csv` (no preprocessing).

    Empty cells and ``nan`` become NaN; anything else non-numeric is a
    :class:`DataError` naming the line.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        ids = header[1:] if date_column else header
        dates, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            if date_column:
                dates.append(rec[0])
                rec = rec[1:]
            try:
                rows.append([float(x) if x.strip() not in ("", "NA") else np.nan for x in rec])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    try:
        return ReturnPanel(np.array(rows), ids, dates if date_column else None)
    except InvalidInputError as exc:
        raise DataError(f"{path}: {exc}") from None
