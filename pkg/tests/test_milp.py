import math
from itertools import combinations

import numpy as np
import pytest

from twlearn import milp
from twlearn.errors import FormatError, InfeasibleInput, InstanceTooLarge, MissingVariable, TreewidthExceeded
from twlearn.graph import Dag, UndirectedGraph, dag_treewidth_at_most, eliminate, moral_graph, treewidth_exact
from twlearn.oracle import brute_force_learn
from twlearn.scoring import ScoreCache, read_scores
from twlearn.synthetic import random_integer_cache

C4 = UndirectedGraph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
K3 = UndirectedGraph.complete(3)


def random_dag(n, rng, p=0.5):
    order = rng.permutation(n)
    parents = [set() for _ in range(n)]
    for a, b in combinations(range(n), 2):
        if rng.random() < p:
            parents[order[b]].add(int(order[a]))
    return Dag(n, parents)


def full_cache(n, max_in_degree, rng):
    return random_integer_cache(n, max_in_degree, rng)


@pytest.fixture(scope="module")
def three(data_dir):
    return read_scores(data_dir / "three_vars.scores")


# -- building ---------------------------------------------------------


def test_learning_model_variable_counts(three):
    m = milp.build_learning_model(three, 2)
    names = m.var_names
    assert len(names) == 6 + 3 + 3 + 12
    assert sum(x.startswith("y_") for x in names) == 6
    assert sum(x.startswith("pi_") for x in names) == 12
    assert m.binary_count == 18


@pytest.mark.parametrize("n", [3, 5, 9])
def test_row_count_formulas(n):
    rng = np.random.default_rng(n)
    cache = full_cache(n, 2, rng)
    counts = milp.build_learning_model(cache, 2).row_counts()
    fams = cache.families
    assert counts["tw_deg"] == n
    assert counts["tw_ord"] == n * (n - 1)
    assert counts["tw_fill"] == milp.fill_row_count(n) == n * math.comb(n - 1, 2)
    assert counts["pick"] == n
    assert counts["acyc"] == counts["moral1"] == sum(len(ps) for f in fams for ps, _ in f)
    assert counts["moral2"] == sum(math.comb(len(ps), 2) for f in fams for ps, _ in f)
    assert "tw_edge" not in counts


def test_fill_rows_at_nine_nodes():
    assert milp.fill_row_count(9) == 252


def test_treewidth_model_counts():
    m = milp.build_treewidth_model(C4, 2)
    assert m.row_counts() == {"tw_deg": 4, "tw_ord": 12, "tw_edge": 4, "tw_fill": 12}
    assert not m.objective


def test_rows_have_the_documented_shape(three):
    m = milp.build_learning_model(three, 2)
    rows = {r.name: r for r in m.rows}
    ix = m.var

    def as_named(r):
        return {m.var_names[i]: c for i, c in r.terms}, r.sense, r.rhs

    assert as_named(rows["tw_deg_1"]) == ({"y_1_0": 1, "y_1_2": 1}, "<=", 2)
    assert as_named(rows["tw_ord_0_2"]) == ({"y_0_2": 4, "z_2": -1, "z_0": 1}, "<=", 3)
    assert as_named(rows["tw_fill_1_0_2"]) == ({"y_1_0": 1, "y_1_2": 1, "y_0_2": -1, "y_2_0": -1}, "<=", 1)
    assert as_named(rows["acyc_2_3_1"]) == ({"pi_2_3": 4, "v_1": -1, "v_2": 1}, "<=", 3)
    assert as_named(rows["moral2_0_3_1_2"]) == ({"pi_0_3": 1, "y_1_2": -1, "y_2_1": -1}, "<=", 0)
    assert m.objective[ix("pi_2_3")] == -1


def test_builder_rejects_missing_empty_set():
    class NoEmpty:
        n = 1
        families = [[((1,), -1.0)]]

        def local(self, i, ps):
            return -1.0 if ps == (1,) else None

    with pytest.raises(ValueError):
        milp.build_learning_model(NoEmpty(), 1)


# -- LP export --------------------------------------------------------


def test_lp_matches_golden_file(three, data_dir):
    text = milp.lp_text(milp.build_learning_model(three, 2))
    assert text == (data_dir / "three_vars_w2.lp").read_text()


def test_lp_export_is_byte_stable(tmp_path, rng):
    m = milp.build_learning_model(full_cache(5, 2, rng), 3)
    milp.export_lp(m, tmp_path / "a.lp")
    milp.export_lp(m, tmp_path / "b.lp")
    assert (tmp_path / "a.lp").read_bytes() == (tmp_path / "b.lp").read_bytes()


def test_lp_sections_in_order(three):
    text = milp.lp_text(milp.build_learning_model(three, 1))
    heads = [ln for ln in text.splitlines() if not ln.startswith(" ")]
    assert heads == ["Maximize", "Subject To", "Bounds", "Binary", "End"]
    check = milp.lp_text(milp.build_treewidth_model(C4, 2)).splitlines()
    assert check[:2] == ["Minimize", " obj:"]


def test_lp_reads_in_highs(tmp_path):
    highspy = pytest.importorskip("highspy")
    cache = full_cache(9, 3, np.random.default_rng(0))
    path = tmp_path / "nine.lp"
    model = milp.build_learning_model(cache, 4)
    milp.export_lp(model, path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    lp = h.getLp()
    assert lp.num_col_ == len(model.var_names)
    assert lp.num_row_ == len(model.rows)


def test_highs_solution_imports_and_matches_oracle(tmp_path):
    highspy = pytest.importorskip("highspy")
    for seed in range(3):
        cache = full_cache(4, 2, np.random.default_rng(seed))
        for w in (1, 2):
            model = milp.build_learning_model(cache, w)
            milp.export_lp(model, tmp_path / "m.lp")
            h = highspy.Highs()
            h.setOptionValue("output_flag", False)
            h.readModel(str(tmp_path / "m.lp"))
            h.run()
            names = h.getLp().col_names_
            values = h.getSolution().col_value
            (tmp_path / "m.sol").write_text("".join(f"{a} {b!r}\n" for a, b in zip(names, values)))
            a = milp.read_solution(tmp_path / "m.sol", model)
            report = milp.check_assignment(model, a)
            assert report.feasible
            dag, order = milp.decode_solution(model, a)
            assert report.objective == pytest.approx(brute_force_learn(cache, w).total_score, abs=1e-6)
            assert dag_treewidth_at_most(dag, w, witness=order)


# -- assignments ------------------------------------------------------


def test_solution_reader_snaps_binaries(tmp_path, three):
    m = milp.build_learning_model(three, 2)
    a = milp.encode_witness(m, Dag(3))
    lines = [f"{k} {v}" for k, v in a.items()]
    lines[0] = f"{m.var_names[0]} 0.9999996" if a[m.var_names[0]] == 1 else f"{m.var_names[0]} 3e-7"
    lines.append("# comment")
    (tmp_path / "s.txt").write_text("\n".join(lines) + "\n")
    b = milp.read_solution(tmp_path / "s.txt", m)
    assert b[m.var_names[0]] in (0.0, 1.0)
    assert milp.check_assignment(m, b).feasible


def test_solution_reader_keeps_far_values(tmp_path, three):
    m = milp.build_learning_model(three, 2)
    (tmp_path / "s.txt").write_text("y_0_1 0.99\n")
    assert milp.read_solution(tmp_path / "s.txt", m)["y_0_1"] == 0.99


@pytest.mark.parametrize("text, line", [
    ("y_0_1 1\ny_0_2\n", 2),
    ("y_0_1 one\n", 1),
    ("y_0_1 1\ny_0_1 0\n", 2),
    ("nope 1\n", 1),
])
def test_solution_reader_errors(tmp_path, three, text, line):
    m = milp.build_learning_model(three, 2)
    (tmp_path / "s.txt").write_text(text)
    with pytest.raises(FormatError) as err:
        milp.read_solution(tmp_path / "s.txt", m)
    assert err.value.line == line


def test_write_read_solution_round_trip(tmp_path, three):
    m = milp.build_learning_model(three, 2)
    a = milp.encode_witness(m, Dag(3, [[1], [], [0, 1]]))
    milp.write_solution(a, m, tmp_path / "s.txt")
    assert dict(milp.read_solution(tmp_path / "s.txt", m)) == dict(a)


# -- checking and decoding -------------------------------------------


def test_all_zero_assignment_violates_pick(three):
    m = milp.build_learning_model(three, 2)
    report = milp.check_assignment(m, {name: 0 for name in m.var_names})
    assert not report.feasible
    assert report.first_violation() == "pick_0"


def test_missing_variable(three):
    m = milp.build_learning_model(three, 2)
    with pytest.raises(MissingVariable):
        milp.check_assignment(m, {"y_0_1": 0})


def test_flipped_y_names_the_moral_row():
    cache = full_cache(3, 2, np.random.default_rng(0))
    m = milp.build_learning_model(cache, 1)
    chain = Dag(3, [[], [0], [1]])
    a = dict(milp.encode_witness(m, chain))
    assert milp.check_assignment(m, a).feasible
    edge = "y_0_1" if a["y_0_1"] == 1 else "y_1_0"
    a[edge] = 0.0
    report = milp.check_assignment(m, a)
    t = m.families[1].index((0,))
    assert report.first_violation() == f"moral1_1_{t}_0"
    assert "moral1" in report.text() and "infeasible" in report.text()


def test_every_mutated_binary_is_caught_or_still_sound(rng):
    for _ in range(20):
        cache = full_cache(4, 2, rng)
        m = milp.build_learning_model(cache, 2)
        d = brute_force_learn(cache, 2).dag
        base = dict(milp.encode_witness(m, d))
        for idx in sorted(m.binary):
            a = dict(base)
            name = m.var_names[idx]
            a[name] = 1 - a[name]
            report = milp.check_assignment(m, a)
            if report.feasible:
                dag, order = milp.decode_solution(m, a)
                assert dag_treewidth_at_most(dag, 2, witness=order)
            else:
                assert report.first_violation() is not None


def test_objective_equals_decoded_score(rng):
    for _ in range(20):
        cache = full_cache(5, 2, rng)
        d = brute_force_learn(cache, 2).dag
        m = milp.build_learning_model(cache, 2)
        report = milp.check_assignment(m, milp.encode_witness(m, d))
        assert report.objective == sum(cache.local(i, d.parent_tuple(i)) for i in range(5))


def test_decode_rejects_infeasible(three):
    m = milp.build_learning_model(three, 2)
    with pytest.raises(InfeasibleInput):
        milp.decode_solution(m, {name: 0 for name in m.var_names})


def test_trivial_model_decodes_to_empty_dag():
    cache = ScoreCache(list("abc"), [[((), -1.0)]] * 3)
    m = milp.build_learning_model(cache, 1)
    a, obj = milp.solve_tiny(m)
    dag, _ = milp.decode_solution(m, a)
    assert dag == Dag(3) and obj == -3


# -- witnesses --------------------------------------------------------


def test_witness_of_empty_dag_has_no_y():
    cache = full_cache(4, 2, np.random.default_rng(1))
    m = milp.build_learning_model(cache, 1)
    a = milp.encode_witness(m, Dag(4))
    assert all(a[x] == 0 for x in m.var_names if x.startswith("y_"))
    assert milp.check_assignment(m, a).feasible


def test_witness_for_chain():
    cache = full_cache(3, 1, np.random.default_rng(2))
    m = milp.build_learning_model(cache, 1)
    assert milp.check_assignment(m, milp.encode_witness(m, Dag(3, [[], [0], [1]]))).feasible


def test_witness_refuses_wide_dag():
    cache = full_cache(3, 2, np.random.default_rng(3))
    m = milp.build_learning_model(cache, 1)
    with pytest.raises(TreewidthExceeded):
        milp.encode_witness(m, Dag(3, [[], [], [0, 1]]))


def test_witnesses_for_random_dags(rng):
    done = 0
    while done < 200:
        n = int(rng.integers(1, 6))
        d = random_dag(n, rng)
        if max((len(p) for p in d.parents), default=0) > 3:
            continue
        tw = treewidth_exact(moral_graph(d))[0]
        w = int(rng.integers(max(tw, 1), max(n, 2)))
        m = milp.build_learning_model(full_cache(n, 3, rng), w)
        report = milp.check_assignment(m, milp.encode_witness(m, d))
        assert report.feasible, report.text()
        done += 1


# -- tiny solver ------------------------------------------------------


def test_triangle_treewidth_check():
    assert milp.solve_tiny(milp.build_treewidth_model(K3, 1)) is None
    a, _ = milp.solve_tiny(milp.build_treewidth_model(K3, 2))
    chordal, _ = milp.decode_chordalization(milp.build_treewidth_model(K3, 2), a)
    assert chordal == K3


def test_four_cycle_needs_one_fill_edge():
    m = milp.build_treewidth_model(C4, 2)
    a, _ = milp.solve_tiny(m)
    chordal, order = milp.decode_chordalization(m, a)
    fill = chordal.edges - C4.edges
    assert fill in ({(0, 2)}, {(1, 3)})
    assert eliminate(C4, order)[1] <= 2
    assert milp.solve_tiny(milp.build_treewidth_model(C4, 1)) is None


def test_treewidth_check_agrees_with_exact_treewidth(rng):
    for _ in range(15):
        n = 4
        g = UndirectedGraph(n, [e for e in combinations(range(n), 2) if rng.random() < 0.6])
        tw = treewidth_exact(g)[0]
        for w in range(0, 3):
            feasible = milp.solve_tiny(milp.build_treewidth_model(g, w)) is not None
            assert feasible == (tw <= w)


def test_solve_tiny_size_guard(rng):
    m = milp.build_learning_model(full_cache(5, 2, rng), 2)
    with pytest.raises(InstanceTooLarge):
        milp.solve_tiny(m)
    with pytest.raises(InstanceTooLarge):
        next(milp.enumerate_feasible(m))


@pytest.mark.parametrize("w", [1, 2])
def test_solve_tiny_matches_oracle_n3(w):
    rng = np.random.default_rng(10 + w)
    for _ in range(10):
        cache = full_cache(3, 2, rng)
        m = milp.build_learning_model(cache, w)
        a, obj = milp.solve_tiny(m)
        assert obj == brute_force_learn(cache, w).total_score
        dag, _ = milp.decode_solution(m, a)
        assert sum(cache.local(i, dag.parent_tuple(i)) for i in range(3)) == obj


def test_w2_at_three_nodes_is_unconstrained():
    rng = np.random.default_rng(12)
    for _ in range(10):
        cache = full_cache(3, 2, rng)
        _, obj = milp.solve_tiny(milp.build_learning_model(cache, 2))
        assert obj == brute_force_learn(cache, 2).total_score == brute_force_learn(cache, 5).total_score


@pytest.mark.parametrize("w", [1, 2])
def test_every_feasible_assignment_at_n4_is_sound(w):
    cache = full_cache(4, 2, np.random.default_rng(20 + w))
    m = milp.build_learning_model(cache, w)
    seen = set()
    for a in milp.enumerate_feasible(m, limit=40):
        report = milp.check_assignment(m, a)
        assert report.feasible
        dag, order = milp.decode_solution(m, a)
        assert dag_treewidth_at_most(dag, w, witness=order)
        assert report.objective == sum(cache.local(i, dag.parent_tuple(i)) for i in range(4))
        seen.add(dag)
    assert len(seen) == brute_force_learn(cache, w).enumerated_count
