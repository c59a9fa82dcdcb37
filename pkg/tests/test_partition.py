import io as stdio

import numpy as np
import pytest

from fieldfit.adaptive import AdaptiveConfig, fit_adaptive
from fieldfit.elastic_net import ElasticNetConfig
from fieldfit.errors import DataError
from fieldfit.fields import FieldData, box_field_2d, step_field_1d
from fieldfit.geometry import build_mesh, locate
from fieldfit.partition import (
    DictionarySpec,
    GlobalSurrogate,
    dumps,
    fit_parallel,
    load,
    loads,
    make_partition,
    save,
)

EN_2D = ElasticNetConfig(lam1=4.59e-4, lam2=1e-4, tol=1e-6, max_iters=2000)
PLAIN_CFG = AdaptiveConfig(m_max=0, elastic=EN_2D)


def test_partition_1x1():
    mesh = build_mesh(2, (32, 32), ((0, 1), (0, 1)))
    part = make_partition(mesh, 1, 1)
    assert part.n_subdomains == 1
    assert np.all(part.cell_to_subdomain == 0)


def test_partition_2x2_equal_cells():
    mesh = build_mesh(2, (32, 32), ((0, 1), (0, 1)))
    part = make_partition(mesh, 2, 2)
    counts = np.bincount(part.cell_to_subdomain)
    np.testing.assert_array_equal(counts, [256, 256, 256, 256])


def test_partition_2x1_shape():
    mesh = build_mesh(2, (32, 32), ((0, 1), (0, 1)))
    part = make_partition(mesh, 2, 1)
    counts = np.bincount(part.cell_to_subdomain)
    np.testing.assert_array_equal(counts, [512, 512])
    assert part.boxes[0].hi[0] == 0.5
    assert part.boxes[0].open_hi == (True, False)
    assert part.boxes[1].open_hi == (False, False)


def test_partition_rejects_nondividing():
    mesh = build_mesh(2, (32, 32), ((0, 1), (0, 1)))
    with pytest.raises(ValueError, match="px=3"):
        make_partition(mesh, 3, 2)


def test_partition_boxes_cover_domain_once():
    mesh = build_mesh(2, (16, 16), ((0, 1), (0, 1)))
    part = make_partition(mesh, 4, 2)
    pts = np.random.default_rng(3).random((20000, 2))
    hits = sum(b.contains_many(pts).astype(int) for b in part.boxes)
    assert np.all(hits == 1)


def test_partition_centroid_map_matches_locate():
    mesh = build_mesh(2, (8, 8), ((0, 1), (0, 1)))
    part = make_partition(mesh, 2, 4)
    for i, c in enumerate(mesh.centroids):
        assert locate(c, part.boxes) == part.cell_to_subdomain[i]


def test_fit_parallel_1x1_matches_direct():
    field = box_field_2d(8, 8)
    part = make_partition(field.mesh, 1, 1)
    spec = DictionarySpec(sigma=0.13)
    surrogate, report = fit_parallel(field, part, PLAIN_CFG, spec)
    direct, _ = fit_adaptive(field.whole(), spec.build(field.whole()), PLAIN_CFG)
    np.testing.assert_array_equal(surrogate.locals[0].beta, direct.beta)
    assert len(report.rounds) == 1


def test_fit_parallel_constant_field():
    mesh = build_mesh(2, (8, 8), ((0, 1), (0, 1)))
    field = FieldData(mesh=mesh, values=np.full(64, 3.7))
    part = make_partition(mesh, 2, 2)
    surrogate, _ = fit_parallel(field, part, AdaptiveConfig(m_max=0), DictionarySpec(sigma=0.13))
    rng = np.random.default_rng(4)
    pts = rng.random((200, 2))
    np.testing.assert_allclose(surrogate.evaluate(pts), 3.7, rtol=1e-6)


def test_fit_parallel_worker_count_bit_identical():
    field = box_field_2d(16, 16)
    part = make_partition(field.mesh, 2, 2)
    spec = DictionarySpec(sigma=0.0625)
    s1, _ = fit_parallel(field, part, PLAIN_CFG, spec, workers=1)
    s4, _ = fit_parallel(field, part, PLAIN_CFG, spec, workers=4)
    for a, b in zip(s1.locals, s4.locals):
        np.testing.assert_array_equal(a.beta, b.beta)
        np.testing.assert_array_equal(a.dictionary.centers, b.dictionary.centers)
    pts = np.random.default_rng(0).random((500, 2))
    np.testing.assert_array_equal(s1.evaluate(pts), s4.evaluate(pts))


class _BrokenSpec(DictionarySpec):
    def build(self, sub):
        raise RuntimeError("boom")


def test_fit_parallel_failure_reports_subdomain_index():
    mesh = build_mesh(2, (4, 4), ((0, 1), (0, 1)))
    field = FieldData(mesh=mesh, values=np.ones(16))
    part = make_partition(mesh, 2, 1)
    specs = [DictionarySpec(sigma=0.1), _BrokenSpec(sigma=0.1)]
    with pytest.raises(RuntimeError, match="subdomain 1"):
        fit_parallel(field, part, PLAIN_CFG, specs)


def test_fit_parallel_broadcast_length_mismatch():
    mesh = build_mesh(2, (4, 4), ((0, 1), (0, 1)))
    field = FieldData(mesh=mesh, values=np.ones(16))
    part = make_partition(mesh, 2, 2)
    with pytest.raises(ValueError, match="2 entries for 4"):
        fit_parallel(field, part, [PLAIN_CFG, PLAIN_CFG], DictionarySpec(sigma=0.1))


def test_evaluate_preserves_order_and_positivity():
    field = box_field_2d(8, 8)
    part = make_partition(field.mesh, 2, 2)
    surrogate, _ = fit_parallel(field, part, PLAIN_CFG, DictionarySpec(sigma=0.13))
    pts = np.random.default_rng(1).random((333, 2))
    vals = surrogate.evaluate(pts)
    assert np.all(vals > 0)
    # each point's value equals its owning subdomain's local surrogate,
    # returned at the point's input position
    from fieldfit.geometry import locate_many

    owner = locate_many(pts, part.boxes)
    for i in range(part.n_subdomains):
        sel = owner == i
        np.testing.assert_array_equal(vals[sel], surrogate.locals[i].evaluate(pts[sel]))


def test_evaluate_out_of_domain_reports_index():
    field = box_field_2d(4, 4)
    part = make_partition(field.mesh, 1, 1)
    surrogate, _ = fit_parallel(field, part, PLAIN_CFG, DictionarySpec(sigma=0.3))
    pts = np.array([[0.5, 0.5], [1.5, 0.5]])
    with pytest.raises(ValueError, match="index 1"):
        surrogate.evaluate(pts)


def test_evaluate_centroids_close_to_data_after_fit():
    field = box_field_2d(8, 8)
    part = make_partition(field.mesh, 1, 1)
    cfg = AdaptiveConfig(m_max=0, elastic=ElasticNetConfig(tol=1e-12))
    surrogate, report = fit_parallel(field, part, cfg, DictionarySpec(sigma=0.05))
    vals = surrogate.evaluate(field.mesh.centroids)
    worst = report.rounds[0][-1].max_residual
    cell_area = field.mesh.cell_measure
    assert np.max((vals - field.values) ** 2 * cell_area) <= worst * (1 + 1e-9)


def test_per_subdomain_continuity_near_internal_face():
    field = box_field_2d(8, 8)
    part = make_partition(field.mesh, 2, 1)
    surrogate, _ = fit_parallel(field, part, PLAIN_CFG, DictionarySpec(sigma=0.13))
    ys = np.linspace(0.05, 0.95, 7)
    for eps in (1e-6, 1e-9):
        a = surrogate.evaluate(np.column_stack([np.full(7, 0.5 + eps), ys]))
        b = surrogate.evaluate(np.column_stack([np.full(7, 0.5 + 2 * eps), ys]))
        diff = np.max(np.abs(a - b))
        assert diff < 1e-3 if eps == 1e-6 else diff < 1e-6


def test_lattice_spec_build():
    field = box_field_2d(8, 8)
    sub = field.whole()
    d = DictionarySpec(sigma=0.1, lattice=4).build(sub)
    assert len(d) == 16
    d2 = DictionarySpec(sigma=0.1).build(sub)
    assert len(d2) == 64


def test_save_load_roundtrip_bit_identical():
    field = box_field_2d(8, 8)
    part = make_partition(field.mesh, 2, 2)
    surrogate, _ = fit_parallel(
        field, part, PLAIN_CFG, DictionarySpec(sigma=0.13), metadata={"config": "unit test"}
    )
    text = dumps(surrogate)
    back = loads(text)
    assert back.metadata["config"] == "unit test"
    assert back.metadata["field_checksum"] == field.checksum()
    pts = np.random.default_rng(2).random((1000, 2))
    np.testing.assert_array_equal(surrogate.evaluate(pts), back.evaluate(pts))
    for a, b in zip(surrogate.locals, back.locals):
        np.testing.assert_array_equal(a.beta, b.beta)
        np.testing.assert_array_equal(a.dictionary.centers, b.dictionary.centers)
        np.testing.assert_array_equal(a.dictionary.widths, b.dictionary.widths)
        np.testing.assert_array_equal(a.dictionary.generations, b.dictionary.generations)


def test_save_load_1d_roundtrip(tmp_path):
    field = step_field_1d(16)
    part = make_partition(field.mesh, 2)
    cfg = AdaptiveConfig(
        k_top=1, m_max=3, eta=0.5, m_q=3,
        elastic=ElasticNetConfig(lam1=4.59e-4, lam2=4.64e-6),
    )
    surrogate, _ = fit_parallel(field, part, cfg, DictionarySpec(sigma=0.0019))
    path = tmp_path / "sur.txt"
    save(surrogate, path)
    back = load(path)
    pts = np.random.default_rng(3).uniform(0, 0.03125, (1000, 1))
    np.testing.assert_array_equal(surrogate.evaluate(pts), back.evaluate(pts))


def test_load_rejects_truncation_and_bad_header():
    field = box_field_2d(4, 4)
    part = make_partition(field.mesh, 1, 1)
    surrogate, _ = fit_parallel(field, part, PLAIN_CFG, DictionarySpec(sigma=0.3))
    text = dumps(surrogate)
    with pytest.raises(DataError, match="truncated"):
        loads("\n".join(text.splitlines()[: len(text.splitlines()) // 2]))
    with pytest.raises(DataError, match="not a surrogate"):
        loads("something else entirely\n")
    with pytest.raises(DataError, match="version"):
        loads(text.replace("fieldfit-surrogate 1", "fieldfit-surrogate 99", 1))


def test_mesh_free_reuse_on_other_grids():
    field = box_field_2d(8, 8)
    part = make_partition(field.mesh, 1, 1)
    surrogate, _ = fit_parallel(field, part, PLAIN_CFG, DictionarySpec(sigma=0.13))
    coarse = build_mesh(2, (16, 16), ((0, 1), (0, 1))).centroids
    fine = build_mesh(2, (64, 64), ((0, 1), (0, 1))).centroids
    v16 = surrogate.evaluate(coarse)
    v64 = surrogate.evaluate(fine)
    assert v16.shape == (256,)
    assert v64.shape == (4096,)
    assert np.all(v16 > 0) and np.all(v64 > 0)
