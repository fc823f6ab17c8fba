import math
import re

import numpy as np
import pytest

from multable.analysis import (
    C,
    crossover_log2,
    format_rows,
    normalized_ratio,
    phi,
    row_from_estimate,
    rows_from_table,
)
from multable.errors import CapacityError, DomainError
from multable.incremental import constructed_count, delta_value
from multable.montecarlo import EstimateReport
from multable.numtheory import spf_table
from multable.shapes import render_shape, shape_cells, shape_metadata

M_2_20 = 218457593222
M_2_30 = 204505763483830092


def test_c_constant():
    assert f"{C:.6f}" == "0.086071"


def test_phi_values():
    # mpmath oracle 6.86448152882480; quoted as about 6.865
    assert phi((1 << 30) - 1) == pytest.approx(6.86448152882480, rel=1e-12)
    assert phi((1 << 30) - 1) == pytest.approx(6.865, abs=1e-3)
    assert phi(n_exponent=30) == pytest.approx(phi((1 << 30) - 1), rel=1e-12)
    # exponent form agrees with direct evaluation wherever both are possible
    for k in (5, 20, 52, 200):
        assert phi(n_exponent=k) == pytest.approx(phi((1 << k) - 1), rel=1e-12)
    assert math.isfinite(phi(n_exponent=10 ** 8))


def test_phi_domain():
    with pytest.raises(DomainError):
        phi(2)
    with pytest.raises(DomainError):
        phi(0)
    with pytest.raises(DomainError):
        normalized_ratio(100, 0)


def test_crossover():
    assert crossover_log2() == pytest.approx(53_431_908, rel=1e-6)
    # derivative test: below the crossover log log n varies faster than log n^c
    x = math.exp(3 / (2 * C))
    for f in (0.5, 0.99):
        a = C / (f * x)
        b = 1.5 / ((f * x) * math.log(f * x))
        assert a < b
    a = C / (2 * x)
    b = 1.5 / ((2 * x) * math.log(2 * x))
    assert a > b


def test_normalized_values():
    assert normalized_ratio((1 << 20) - 1, M_2_20) == pytest.approx(0.9414, abs=2e-4)
    assert normalized_ratio(None, M_2_30, n_exponent=30) == pytest.approx(0.8213, abs=2e-4)
    n = 12345
    assert normalized_ratio(n, n * n) == pytest.approx(1 / phi(n), rel=1e-12)
    # float input is a ratio M / n^2
    assert normalized_ratio(None, M_2_30 / ((1 << 30) - 1) ** 2, n_exponent=30) == pytest.approx(
        normalized_ratio(None, M_2_30, n_exponent=30), rel=1e-12)


def test_report_rows_format():
    table = np.array([[1, 0, 1], [3, 0, 6], [7, 0, 25], [10, 4, 42]], dtype=np.int64)
    text = format_rows(rows_from_table(table, normalized=True))
    lines = text.splitlines()
    assert lines[0] == "n,M,M/n^2,1e4*sigma,(n^2/M)/Phi"
    assert lines[1] == "1,1,1.0000,,"
    assert lines[-1].startswith("10,42,0.4200,,")
    assert re.fullmatch(r"10,42,0\.4200,,\d\.\d{4}", lines[-1])
    dy = rows_from_table(table, dyadic_only=True)
    assert [r.n for r in dy] == [1, 3, 7]


def test_report_from_estimate():
    rep = EstimateReport(None, 30, "product", 10 ** 6, None, 0.17750, 2.89e-8, 1.7e-4, 42, 30,
                         "bach", 1, 1.0)
    row = row_from_estimate(rep)
    line = format_rows([row]).splitlines()[1]
    assert line.startswith("2^30-1,,0.1775,1.70,")
    assert row.normalized == pytest.approx(normalized_ratio(None, 0.1775, n_exponent=30))


@pytest.mark.parametrize("n,w,dark", [(42, 0, 41), (377, 6, 119), (42, 1, 6), (377, 0, 270)])
def test_shape_dark_cells(n, w, dark):
    meta = shape_metadata(render_shape(n, w))
    assert meta["dark_cells"] == dark
    assert meta["delta"] == delta_value(n).delta
    assert meta["dark_cells"] + meta["light_cells"] == meta["region_cells"]


def test_shape_42_region():
    cells = shape_cells(42, 0)
    # row extents 20 + 12 + 4 + 3 + 2
    assert [end - start for _, start, end, _ in cells.rows] == [20, 12, 4, 3, 2]


def test_prime_shape_empty():
    meta = shape_metadata(render_shape(7, 0))
    assert meta["region_cells"] == meta["dark_cells"] == 0
    assert 'class="dark"' not in render_shape(7, 0)


def test_dark_cells_equal_constructed_count():
    spf = spf_table(1000)
    for n in range(1, 1001):
        for w in (0, 1, 2, 6):
            assert shape_cells(n, w).dark_cells == constructed_count(n, w, spf), (n, w)


def test_svg_is_well_formed():
    import xml.etree.ElementTree as ET

    root = ET.fromstring(render_shape(377, 6))
    ns = "{http://www.w3.org/2000/svg}"
    rects = root.findall(f"{ns}rect")
    dark = sum(int(float(r.get("width"))) // 24 for r in rects if r.get("class") == "dark")
    assert dark == 119


def test_shape_guards():
    with pytest.raises(CapacityError):
        render_shape(10_001, 0)
    with pytest.raises(ValueError):
        render_shape(42, 5)
