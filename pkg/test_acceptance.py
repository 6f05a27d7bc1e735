import random

import pytest

from repro.reproduce import (
    all_checks,
    check_capacity_collapse,
    check_closures,
    check_example_abc,
    check_example_intersection,
    check_firing_algebra,
    check_matrix_fin,
    check_needs_long_lhs,
    check_net_control,
    check_vector_fin,
    check_weak_strong,
    main,
)


def assert_passes(check):
    assert check.ok, check.line()


def test_example_abc():
    assert_passes(check_example_abc())


def test_closures():
    assert_passes(check_closures())


def test_needs_long_lhs():
    assert_passes(check_needs_long_lhs())


def test_firing_algebra():
    assert_passes(check_firing_algebra(random.Random(2024), samples=200))


def test_small_random_samples():
    rng = random.Random(2024)
    assert_passes(check_capacity_collapse(rng, samples=3, max_len=5))
    assert_passes(check_net_control(rng, samples=3, max_len=5))
    assert_passes(check_weak_strong(rng, samples=3, max_len=5))


def test_main_runs_selected_checks(capsys):
    assert main(["--only", "1", "9"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("[1] PASS ")
    assert out[1].startswith("[9] PASS ")


def test_all_checks_are_numbered():
    assert sorted(all_checks(2024)) == list(range(1, 11))


@pytest.mark.slow
def test_example_intersection():
    assert_passes(check_example_intersection())


@pytest.mark.slow
def test_matrix_fin():
    assert_passes(check_matrix_fin())


@pytest.mark.slow
@pytest.mark.parametrize("number", [3, 6, 7, 8, 10])
def test_randomized_checks(number):
    assert_passes(all_checks(2024)[number]())


@pytest.mark.slow
def test_vector_fin_sample():
    assert_passes(check_vector_fin(random.Random(7), samples=3, max_len=5))
