import json

import numpy as np
import pytest

from glfem.core.exceptions import FieldFormatError
from glfem.schemas.eigen import Verdict
from glfem.schemas.study import ConvergenceRecord
from glfem.services import storage

from conftest import random_field


@pytest.fixture
def field_text(mesh4):
    return storage.dump_field(random_field(mesh4, seed=61), 8.0)


def test_field_text_reads_back_bit_for_bit(mesh4):
    u = random_field(mesh4, seed=61)
    v, kappa = storage.load_field(storage.dump_field(u, 8.0))

    assert kappa == 8.0
    assert v.mesh.n == 4
    assert np.array_equal(v.re, u.re)
    assert np.array_equal(v.im, u.im)


def test_field_file_layout(field_text):
    lines = field_text.splitlines()

    assert lines[0] == "n=4 kappa=8.0"
    assert len(lines) == 1 + 25
    assert lines[1].startswith("0,0.0,0.0,")
    assert field_text.endswith("\n")


def test_field_file_round_trip_through_disk(tmp_path, mesh8):
    u = random_field(mesh8, seed=62)
    path = storage.write_field(storage.field_path(tmp_path, 8.0, 8), u, 8.0)
    v, kappa = storage.read_field(path)

    assert path.name == "field_k8_n8.txt"
    assert kappa == 8.0
    assert np.array_equal(v.values, u.values)
    assert [p.name for p in tmp_path.iterdir()] == [path.name]


@pytest.mark.parametrize(
    "header",
    ["", "n=4", "kappa=8 n=4", "n=four kappa=8.0", "n=0 kappa=8.0"],
)
def test_malformed_header_is_rejected(field_text, header):
    lines = field_text.splitlines()
    lines[0] = header

    with pytest.raises(FieldFormatError):
        storage.load_field("\n".join(lines))


def test_missing_rows_are_rejected(field_text):
    with pytest.raises(FieldFormatError, match="node rows"):
        storage.load_field("\n".join(field_text.splitlines()[:-1]))


def test_rows_out_of_order_are_rejected(field_text):
    lines = field_text.splitlines()
    lines[1], lines[2] = lines[2], lines[1]

    with pytest.raises(FieldFormatError, match="canonical order"):
        storage.load_field("\n".join(lines))


def test_moved_node_is_rejected(field_text):
    lines = field_text.splitlines()
    parts = lines[3].split(",")
    parts[1] = repr(float(parts[1]) + 1e-9)
    lines[3] = ",".join(parts)

    with pytest.raises(FieldFormatError, match="coordinates"):
        storage.load_field("\n".join(lines))


def test_short_row_is_rejected(field_text):
    lines = field_text.splitlines()
    lines[5] = lines[5].rsplit(",", 1)[0]

    with pytest.raises(FieldFormatError):
        storage.load_field("\n".join(lines))


def test_empty_field_file_is_rejected():
    with pytest.raises(FieldFormatError):
        storage.load_field("")


def test_csv_cells():
    text = storage.dump_csv(
        ("kappa", "n", "order_l2", "preasymptotic_flag", "verdict"),
        [{"kappa": 8.0, "n": 16, "order_l2": None, "preasymptotic_flag": True, "verdict": Verdict.NOT_CERTIFIED}],
    )
    header, row = text.splitlines()

    assert header == "kappa,n,order_l2,preasymptotic_flag,verdict"
    assert row == f"8.0,16,,true,{Verdict.NOT_CERTIFIED.value}"


def test_floats_are_written_with_repr():
    assert storage.format_value(0.1 + 0.2) == "0.30000000000000004"
    assert storage.format_value(np.float64(1e-300)) == "1e-300"
    assert storage.format_value(np.int64(3)) == "3"
    assert storage.format_value(False) == "false"


def test_records_write_their_columns(tmp_path):
    record = ConvergenceRecord(
        kappa=8.0, n=16, h=1 / 16, err_l2=1e-3, err_hk1=1e-2, err_energy=1e-4,
        scaled_l2=1e-3 / 64, scaled_hk1=1e-2 / 64, scaled_energy=1e-4 / 4096,
        energy=5.0, norm_hk1=8.0, preasymptotic_flag=False,
    )
    path = storage.write_csv(tmp_path / "out" / "converge.csv", storage.CONVERGE_COLUMNS, [record])
    header, row = path.read_text().splitlines()

    assert tuple(header.split(",")) == storage.CONVERGE_COLUMNS
    cells = dict(zip(storage.CONVERGE_COLUMNS, row.split(",")))
    assert cells["n"] == "16"
    assert cells["order_hk1"] == ""
    assert cells["preasymptotic_flag"] == "false"
    assert float(cells["err_l2"]) == 1e-3


def test_lod_columns_carry_the_method():
    assert storage.LOD_COLUMNS[-1] == "method"
    assert storage.LOD_COLUMNS[:-1] == storage.CONVERGE_COLUMNS


def test_eig_columns():
    assert storage.eigs_columns(2) == ("kappa", "lambda_1", "lambda_2", "gauge_angle", "verdict")


def test_summary_is_json(tmp_path):
    record = ConvergenceRecord(
        kappa=2.0, n=4, h=0.25, err_l2=0.0, err_hk1=0.0, err_energy=0.0,
        scaled_l2=0.0, scaled_hk1=0.0, scaled_energy=0.0, energy=0.0, norm_hk1=0.0,
    )
    path = storage.write_summary(tmp_path / "summary.json", record)

    assert json.loads(path.read_text())["kappa"] == 2.0


def test_overwrite_replaces_the_whole_file(tmp_path):
    path = tmp_path / "a.txt"
    storage.atomic_write_text(path, "first version, longer\n")
    storage.atomic_write_text(path, "second\n")

    assert path.read_text() == "second\n"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.txt"]


def test_field_path_naming():
    assert storage.field_path("results", 8.0, 64).as_posix() == "results/field_k8_n64.txt"
    assert storage.field_path("results", 0.5, 128, prefix="reference").name == "reference_k0.5_n128.txt"
