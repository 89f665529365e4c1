import numpy as np
import pytest

from gacl import taskgen
from gacl.gridnav import GridTask

from conftest import empty_task
from oracles import brute_edt, dijkstra


def test_fill_zero_gives_empty_arena():
    t = taskgen.generate_reference(0, 16, 16, 0.0, 2)
    assert t.occupancy.sum() == 4 * 15
    assert taskgen.shortest_path(t).length == 22


def test_fill_one_carves_corridor():
    t = taskgen.generate_reference(0, 16, 16, 1.0, 2)
    assert t.problems() == []
    assert taskgen.shortest_path(t) is not None


def test_generate_is_deterministic():
    a = taskgen.generate_reference(7, 16, 16, 0.35, 2)
    b = taskgen.generate_reference(7, 16, 16, 0.35, 2)
    assert a == b
    assert a != taskgen.generate_reference(8, 16, 16, 0.35, 2)


def test_generate_rejects_bad_fill():
    with pytest.raises(ValueError):
        taskgen.generate_reference(0, 16, 16, 1.5, 2)


@pytest.mark.parametrize("seed", range(20))
def test_generated_tasks_valid(seed):
    t = taskgen.generate_reference(seed, 16, 16, 0.2 + 0.015 * seed, 2)
    assert t.problems() == []


def test_shortest_path_empty():
    p = taskgen.shortest_path(empty_task())
    assert p.length == 22
    assert p.cells[0] == (2, 2) and p.cells[-1] == (13, 13)
    assert all(abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1 for a, b in zip(p.cells, p.cells[1:]))


def test_shortest_path_unsolvable():
    t = empty_task()
    t.occupancy[10:, 10] = True
    t.occupancy[10, 10:] = True
    assert taskgen.shortest_path(t) is None
    with pytest.raises(taskgen.UnsolvableTaskError):
        taskgen.difficulty(t)


def test_shortest_path_matches_dijkstra(random_maps):
    for grid in random_maps[:10]:
        t = GridTask(16, 16, grid, (2.5, 2.5, 0), (13.5, 13.5))
        assert taskgen.shortest_path(t).length == dijkstra(grid, (2, 2), (13, 13))


def test_clearance_adjacent_and_interior():
    t = empty_task()
    t.occupancy[5, 6] = True
    assert taskgen.clearance(t, [(5, 5)]) == 1.0
    big = np.zeros((21, 21), dtype=bool)
    taskgen.force_border(big)
    t2 = GridTask(21, 21, big, (2.5, 2.5, 0), (18.5, 18.5))
    assert taskgen.clearance(t2, [(5, 5)]) == 5.0


def test_clearance_empty_path_rejected():
    with pytest.raises(ValueError):
        taskgen.clearance(empty_task(), [])


def test_clearance_matches_brute_force(random_maps):
    for grid in random_maps[:10]:
        t = GridTask(16, 16, grid, (2.5, 2.5, 0), (13.5, 13.5))
        path = taskgen.shortest_path(t)
        dt = brute_edt(grid)
        assert taskgen.clearance(t, path) == min(dt[r, c] for r, c in path.cells)


def test_difficulty_formula():
    t = empty_task()
    s = taskgen.difficulty(t, 1.0, 1.0)
    assert s.value == s.path_length - s.clearance
    assert taskgen.difficulty(t, 1.0, 0.0).value == 22
    # length 22, clearance 5 -> 17 by the formula
    assert 1.0 * 22 - 1.0 * 5 == 17.0


def test_difficulty_increases_with_obstacles_near_path():
    t = empty_task()
    base = taskgen.difficulty(t)
    harder = t.copy()
    # the BFS path runs along row 2 and column 13; put a block beside it
    harder.occupancy[6:8, 11:13] = True
    new = taskgen.difficulty(harder)
    assert new.value > base.value


def test_repair_noop_on_solvable(random_maps):
    for grid in random_maps[:5]:
        assert np.array_equal(taskgen.repair(grid, (2, 2), (13, 13)), grid)


def test_repair_full_interior():
    grid = np.ones((16, 16), dtype=bool)
    out = taskgen.repair(grid, (2, 2), (13, 13))
    want = np.ones((16, 16), dtype=bool)
    want[2, 2:14] = False
    want[2:14, 13] = False
    want[1:4, 1:4] = False
    want[12:15, 12:15] = False
    np.testing.assert_array_equal(out, want)


def test_repair_property_and_idempotence():
    for seed in range(100):
        g = np.random.default_rng(seed).random((16, 16)) < 0.6
        taskgen.force_border(g)
        once = taskgen.repair(g, (2, 2), (13, 13))
        t = GridTask(16, 16, once, (2.5, 2.5, 0), (13.5, 13.5))
        assert taskgen.shortest_path(t) is not None
        np.testing.assert_array_equal(taskgen.repair(once, (2, 2), (13, 13)), once)


def test_reference_set_roundtrip(tmp_path):
    refs = taskgen.make_reference_set(3, n=6)
    again = taskgen.make_reference_set(3, n=6)
    assert all(a == b for a, b in zip(refs.tasks, again.tasks))
    manifest = taskgen.write_reference_set(refs, tmp_path)
    header = manifest.read_text().splitlines()[0]
    assert header == "name,seed,path_length,clearance,difficulty"
    loaded = taskgen.read_reference_set(manifest)
    assert loaded.task_seeds == refs.task_seeds
    assert all(a == b for a, b in zip(refs.tasks, loaded.tasks))
