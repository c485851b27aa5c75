"""Grid search: enumeration order, tie-breaking, reproducibility."""

import pytest

from conftest import chrono_split, random_matrix
from aircal.errors import ConfigError
from aircal.gbdt import Hyperparams
from aircal.tune import GridResult, ParamGrid, grid_search, trials_to_csv


def small_problem(seed=41):
    matrix = random_matrix(60, 3, seed=seed)
    return matrix, chrono_split(matrix)


def test_single_cell_grid():
    matrix, split = small_problem()
    grid = ParamGrid({"eta": (0.3,)})
    base = Hyperparams(n_rounds=5)
    result = grid_search(grid, matrix, split, base)
    assert len(result.trials) == 1
    assert result.best == 0
    assert result.best_params.eta == 0.3
    assert result.best_val_rmse == result.trials[0][1]


def test_duplicate_values_tie_breaks_to_earliest():
    matrix, split = small_problem()
    grid = ParamGrid({"eta": (0.25, 0.25, 0.25)})
    result = grid_search(grid, matrix, split, Hyperparams(n_rounds=4))
    scores = [val for _, val in result.trials]
    assert scores[0] == scores[1] == scores[2]
    assert result.best == 0


def test_trials_cover_cartesian_product_once():
    matrix, split = small_problem()
    grid = ParamGrid({"eta": (0.1, 0.3), "max_depth": (2, 3, 4)})
    result = grid_search(grid, matrix, split, Hyperparams(n_rounds=3))
    combos = [(p.eta, p.max_depth) for p, _ in result.trials]
    assert len(combos) == 6
    assert combos == [
        (0.1, 2), (0.1, 3), (0.1, 4), (0.3, 2), (0.3, 3), (0.3, 4),
    ]


def test_axis_order_in_mapping_does_not_matter():
    matrix, split = small_problem()
    a = grid_search(
        ParamGrid({"eta": (0.1, 0.3), "max_depth": (2, 3)}),
        matrix, split, Hyperparams(n_rounds=3),
    )
    b = grid_search(
        ParamGrid({"max_depth": (2, 3), "eta": (0.1, 0.3)}),
        matrix, split, Hyperparams(n_rounds=3),
    )
    assert [(p.eta, p.max_depth, v) for p, v in a.trials] == [
        (p.eta, p.max_depth, v) for p, v in b.trials
    ]
    assert a.best == b.best


def test_rerun_is_bitwise_identical():
    matrix, split = small_problem()
    grid = ParamGrid({"subsample": (0.6, 0.9), "eta": (0.2,)})
    base = Hyperparams(n_rounds=6, seed=11)
    first = grid_search(grid, matrix, split, base)
    second = grid_search(grid, matrix, split, base)
    assert [v for _, v in first.trials] == [v for _, v in second.trials]
    assert first.best == second.best
    assert trials_to_csv(grid, first) == trials_to_csv(grid, second)


def test_grid_validation_errors():
    with pytest.raises(ConfigError):
        ParamGrid({})
    with pytest.raises(ConfigError):
        ParamGrid({"eta": ()})
    with pytest.raises(ConfigError):
        ParamGrid({"reg_lambda": (1.0,)})
    with pytest.raises(ConfigError):
        ParamGrid({"gamma": (0.0,)})
    with pytest.raises(ConfigError, match="eta.*non-numeric"):
        ParamGrid({"eta": ("[0.1", "0.3]")})
    with pytest.raises(ConfigError, match="non-numeric"):
        ParamGrid({"max_depth": (3, True)})


def test_invalid_cell_value_is_config_error():
    matrix, split = small_problem()
    grid = ParamGrid({"eta": (2.0,)})
    with pytest.raises(ConfigError):
        grid_search(grid, matrix, split, Hyperparams(n_rounds=2))


def test_grid_search_requires_validation_rows():
    matrix, _ = small_problem()
    from aircal.preprocess import DataSplit

    split = DataSplit(
        train_idx=list(range(matrix.n_rows)), val_idx=[], test_idx=[]
    )
    with pytest.raises(ConfigError):
        grid_search(ParamGrid({"eta": (0.3,)}), matrix, split, Hyperparams())


def test_trials_to_csv_shape():
    matrix, split = small_problem()
    grid = ParamGrid({"eta": (0.1, 0.3), "max_depth": (2, 3)})
    result = grid_search(grid, matrix, split, Hyperparams(n_rounds=3))
    text = trials_to_csv(grid, result)
    lines = text.splitlines()
    assert lines[0] == "trial,eta,max_depth,val_rmse"
    assert len(lines) == 5
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        assert cells[0] == str(i)
        assert float(cells[1]) in (0.1, 0.3)
        assert cells[2] in ("2", "3")
        assert float(cells[3]) == result.trials[i][1]
