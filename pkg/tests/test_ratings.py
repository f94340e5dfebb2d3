import numpy as np
import pytest

from mslr.ratings import (RatingFormatError, build_rating_matrix, ingest_rating_triples,
                          ingest_user_ages, split_holdout)
from mslr.render import render_pgm, to_gray8


def write(path, text):
    path.write_text(text)
    return path


def test_ingest_line(tmp_path):
    t = ingest_rating_triples(write(tmp_path / "u.data", "196\t242\t3\t881250949\n"))
    assert (t.users[0], t.items[0], t.ratings[0]) == (196, 242, 3.0)
    assert len(t) == 1


@pytest.mark.parametrize("text,line", [("", None), ("1\t2\tabc\t0\n", 1),
                                       ("1\t2\t3\t0\n1\t2\n", 2), ("1\t-2\t3\t0\n", 1)])
def test_ingest_errors(tmp_path, text, line):
    with pytest.raises(RatingFormatError) as exc:
        ingest_rating_triples(write(tmp_path / "u.data", text))
    if line is not None:
        assert f"line {line}" in str(exc.value)


def test_ingest_ages(tmp_path):
    ages = ingest_user_ages(write(tmp_path / "u.user", "1|24|M|technician|85711\n2|53|F|other|94043\n"))
    assert ages == {1: 24.0, 2: 53.0}
    with pytest.raises(RatingFormatError):
        ingest_user_ages(write(tmp_path / "bad", "1\n"))


def small_triples(tmp_path):
    lines = []
    for u in range(1, 5):
        for i in (10, 20, 30):
            if (u + i) % 3:
                lines.append(f"{u}\t{i}\t{(u + i // 10) % 5 + 1}\t0")
    return ingest_rating_triples(write(tmp_path / "u.data", "\n".join(lines) + "\n"))


def test_age_sorted_groups(tmp_path):
    t = small_triples(tmp_path)
    rm = build_rating_matrix(t, ages={1: 30, 2: 20, 3: 40, 4: 20}, group_count=2)
    assert rm.user_ids.tolist() == [2, 4, 1, 3]
    assert rm.Y.shape == (3, 4)
    assert [(s.block_rows, s.block_cols) for s in rm.partition] == [(3, 2), (3, 4)]
    assert [(b.col_start, b.width) for b in rm.partition.blocks(rm.partition[0])] == [(0, 2), (2, 2)]
    for u, i, r in zip(t.users, t.items, t.ratings):
        row = rm.item_ids.tolist().index(i)
        col = rm.user_ids.tolist().index(u)
        assert rm.mask[row, col] and rm.Y[row, col] == r
    assert rm.mask.sum() == len(t)


def test_single_group_is_plain_low_rank(tmp_path):
    rm = build_rating_matrix(small_triples(tmp_path), group_count=1)
    assert len(rm.partition) == 1 and rm.partition[0].block_cols == 4


def test_group_count_errors(tmp_path):
    t = small_triples(tmp_path)
    with pytest.raises(ValueError):
        build_rating_matrix(t, group_count=5)
    with pytest.raises(ValueError):
        build_rating_matrix(t, ages={1: 3}, group_count=1)


def test_holdout_split():
    mask = np.random.default_rng(0).random((30, 40)) < 0.3
    train, test = split_holdout(mask, 0.2, seed=11)
    assert not np.any(train & test)
    np.testing.assert_array_equal(train | test, mask)
    assert test.sum() == round(0.2 * mask.sum())
    again = split_holdout(mask, 0.2, seed=11)
    np.testing.assert_array_equal(again[1], test)


def test_gray_levels():
    np.testing.assert_array_equal(to_gray8([[0.0, 1.0]]), [[0, 255]])
    assert np.all(to_gray8(np.full((3, 3), -2.0)) == 128)
    with pytest.raises(ValueError):
        to_gray8([[np.nan]])


def test_pgm_file(tmp_path, rng):
    path = tmp_path / "x.pgm"
    X = rng.standard_normal((64, 64))
    render_pgm(X, path)
    raw = path.read_bytes()
    header = b"P5 64 64 255\n"
    assert raw.startswith(header)
    pix = np.frombuffer(raw[len(header):], dtype=np.uint8).reshape(64, 64)
    assert pix.min() == 0 and pix.max() == 255
    assert pix.flat[np.argmax(X)] == 255
    with pytest.raises(OSError):
        render_pgm(X, tmp_path / "missing" / "x.pgm")
