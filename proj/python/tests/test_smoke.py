import pytest

import possrl

FRIENDS = """\
fr(alice,bob)
fr(bob,alice)
fr(bob,eve)
fr(eve,bob)
sm(alice)
"""


@pytest.fixture
def example():
    return possrl.parse_example(FRIENDS)


def test_example_round_trip(example):
    assert len(example) == 5
    assert example.constants == ["alice", "bob", "eve"]
    assert ("fr", 2) in example.predicates
    again = possrl.parse_example(str(example))
    assert again.atoms == example.atoms


def test_hard_rules(example):
    rules = possrl.learn_hard_rules(example, t=2, k=2)
    assert "!fr(V0,V0)" in rules
    assert "fr(V0,V1) v !fr(V1,V0)" in rules


def test_learn_and_infer(example):
    result = possrl.learn(example, {"k": 2, "seed": 3})
    theory = result["theory"]
    assert len(theory) >= len(result["hard"])
    assert theory.strata[-1][0] == 1.0
    out = possrl.infer(theory, "fr(alice,bob)\n!sm(bob)\n")
    assert "fr(bob,alice)" in out["predicted"]
    assert out["mu0"] is not None
    assert out["cut_calls"] <= out["sat_calls"]


def test_learn_is_deterministic(example):
    a = possrl.learn(example, {"k": 2})
    b = possrl.learn(example, {"k": 2})
    assert str(a["theory"]) == str(b["theory"])


def test_infeasible_width(example):
    with pytest.raises(possrl.InfeasibleError):
        possrl.learn(example, {"k": 5})


def test_bad_option(example):
    with pytest.raises(ValueError):
        possrl.learn(example, {"beam.b": 0})


def test_count(example):
    subsets, worlds = possrl.count(example, ["!fr(X,Y) v fr(Y,X)"], k=2)
    assert subsets == 3
    assert worlds == 32


def test_exact_encoding(example):
    theory = possrl.exact_encoding(example, 2)
    assert len(theory) > 0
    assert all(0 <= level <= 1 for level, _ in theory.strata)


def test_theory_text_and_parse_errors():
    theory = possrl.parse_theory("1 :: !fr(X,X)\n0.5 :: !fr(X,Y) v fr(Y,X)\n")
    assert theory.hard == ["!fr(V0,V0)"]
    assert "0.5 :: " in str(theory)
    with pytest.raises(possrl.ParseError):
        possrl.parse_theory("1.5 :: p(X)\n")


def test_synth_and_evaluate():
    generator = possrl.parse_theory(
        "1 :: !fr(X,Y) v fr(Y,X)\n1 :: !fr(X,Y) v !fr(X,Z)\n0.99 :: !sm(X) v ca(X)\n"
    )
    train = possrl.synth(generator, 6, seed=1)
    test = possrl.synth(generator, 6, seed=2)
    assert train.constants == [f"c{i}" for i in range(1, 7)]
    learned = possrl.learn(train)["theory"]
    rows = possrl.evaluate(learned, test, s_max=5, trials=4)
    assert [r["s"] for r in rows] == [1, 2, 3, 4, 5]
    assert all(r["theory_error"] >= 0 and r["baseline_error"] >= 0 for r in rows)
