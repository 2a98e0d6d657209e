import math

import numpy as np
import pytest

from metaset.expr import (ExprError, FamilyForm, evaluate, evaluate_grid, find_scalar_duplicates,
                          grid_coordinates, load_catalog, parse, parse_catalog,
                          starter_catalog_path, to_text)

PRIMITIVE = "cos(X)+cos(Y)+cos(Z)"


def test_cos_at_origin():
    assert evaluate(parse("cos(X)"), [0.0]) == 1.0


def test_dims_inferred():
    assert parse(PRIMITIVE).dims == 3
    assert parse("cos(X)*sin(Y)").dims == 2


def test_unbalanced_paren_offset():
    with pytest.raises(ExprError) as err:
        parse("cos(")
    assert err.value.offset == 4


@pytest.mark.parametrize("text", ["", "   ", "cos(W)", "cos(X)^3", "cos(X", "X", "cos(0.5*X)", "cos(X) cos(Y)"])
def test_rejected_inputs(text):
    with pytest.raises(ExprError):
        parse(text, dims=3)


def test_z_needs_three_dims():
    with pytest.raises(ExprError):
        parse("cos(Z)", dims=2)


def test_analytic_values():
    assert evaluate(parse(PRIMITIVE), [0.25, 0.25, 0.25]) == pytest.approx(0.0, abs=1e-15)
    assert evaluate(parse("cos(X)"), [0.5]) == -1.0
    assert evaluate(parse("(cos(X)+1)^2"), [0.0]) == 4.0
    assert evaluate(parse("-cos(X)^2"), [0.0]) == -1.0  # ^2 binds tighter than unary minus
    assert evaluate(parse("2*cos(X+Y-Z)+0.5"), [0.1, 0.2, 0.3]) == pytest.approx(
        2 * math.cos(2 * math.pi * 0.0) + 0.5)


def test_periodicity_on_catalog():
    rng = np.random.default_rng(3)
    for entry in load_catalog(starter_catalog_path(3)):
        for p in rng.random((20, 3)):
            assert evaluate(entry.expr, p) == pytest.approx(evaluate(entry.expr, p + 1.0), abs=1e-12)


def test_round_trip():
    rng = np.random.default_rng(0)
    for entry in load_catalog(starter_catalog_path(3)):
        again = parse(to_text(entry.expr.ast), dims=3)
        pts = rng.random((100, 3))
        a = [evaluate(entry.expr, p) for p in pts]
        b = [evaluate(again, p) for p in pts]
        assert np.max(np.abs(np.subtract(a, b))) <= 1e-12


def test_grid_layout_x_fastest():
    field = evaluate_grid(parse("cos(X)", dims=3), 8)
    assert field.shape == (8, 8, 8)
    # constant over y and z, varying along the last axis
    assert np.all(field == field[0:1, 0:1, :])
    assert field.ravel()[1] != field.ravel()[0]


def test_grid_matches_pointwise():
    expr = parse("sin(X)*cos(Y)+sin(Y)*cos(Z)+sin(Z)*cos(X)")
    n = 12
    field = evaluate_grid(expr, n)
    rng = np.random.default_rng(1)
    for k, j, i in rng.integers(0, n, size=(100, 3)):
        point = [(i + 0.5) / n, (j + 0.5) / n, (k + 0.5) / n]
        assert field[k, j, i] == pytest.approx(evaluate(expr, point), abs=1e-12)


def test_negation_and_scaling():
    f = evaluate_grid(parse(PRIMITIVE), 8)
    assert np.array_equal(evaluate_grid(parse(f"-({PRIMITIVE})"), 8), -f)
    assert np.array_equal(evaluate_grid(parse(f"4*({PRIMITIVE})"), 8), 4 * f)


def test_grid_minimum_resolution():
    with pytest.raises(ValueError):
        evaluate_grid(parse(PRIMITIVE), 4)


def test_grid_coordinates_are_centres():
    x, y, z = grid_coordinates(4, 3)
    assert x[0, 0, :].tolist() == [0.125, 0.375, 0.625, 0.875]


def test_catalog_parsing_and_errors():
    cat = parse_catalog("# c\nA | cos(X)+cos(Y) | le\n\nB | cos(X) | SQ  # tail\n", dims=2)
    assert [e.family_id for e in cat] == ["A", "B"]
    assert cat[0].form is FamilyForm.LE
    with pytest.raises(ExprError):
        parse_catalog("A | cos(X) | LE\nA | cos(Y) | LE\n", dims=2)
    with pytest.raises(ExprError):
        parse_catalog("A | cos(X) | XX\n", dims=2)
    with pytest.raises(ExprError):
        parse_catalog("A | cos(X)\n", dims=2)


def test_starter_catalogs():
    cat3 = load_catalog(starter_catalog_path(3))
    assert len(cat3) >= 12
    assert {"P-LE", "G-LE", "D-LE"} <= {e.family_id for e in cat3}
    assert len(load_catalog(starter_catalog_path(2), dims=2)) >= 12


def test_scalar_duplicates_found():
    pairs = find_scalar_duplicates(load_catalog(starter_catalog_path(3)))
    assert ("P-LE", "P-LE-x4") in pairs
    assert ("G-LE", "G-LE-x4") in pairs
    # complementary forms are different families
    assert ("P-LE", "P-GE") not in pairs
