import numpy as np
import pytest

from lcn_ot.generators import generate
from lcn_ot.geometry import PointSet
from lcn_ot.pointio import read_points, write_points


@pytest.mark.parametrize("binary", [False, True])
def test_round_trip(tmp_path, rng, binary):
    P = PointSet(rng.standard_normal((7, 3)))
    path = tmp_path / "pts"
    write_points(path, P, binary=binary)
    assert np.array_equal(read_points(path).points, P.points)


def test_text_comments_and_errors(tmp_path):
    f = tmp_path / "a.txt"
    f.write_text("# hello\n2 2\n0 1\n# mid\n2 3\n")
    assert read_points(f).points.tolist() == [[0, 1], [2, 3]]
    f.write_text("2 2\n0 1\n")
    with pytest.raises(ValueError):
        read_points(f)
    f.write_text("1 2\n0 1 2\n")
    with pytest.raises(ValueError):
        read_points(f)


def test_seeded_files_are_byte_identical(tmp_path):
    paths = []
    for k in range(2):
        P, _, _ = generate("uniform-ball", {"n": 20, "d": 4}, seed=9)
        path = tmp_path / f"p{k}.bin"
        write_points(path, P, binary=True)
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()
