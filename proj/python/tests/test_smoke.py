import math

import numpy as np
import pytest

import symflow


def rocksalt():
    rec = next(p for p in symflow.prototypes() if p["name"].startswith("rocksalt"))
    crystal, sg = symflow.parse_cif(rec["cif"])
    return crystal, sg


def test_schedules():
    beta, gamma = symflow.cts_beta(1.0, 0.02)
    assert beta == pytest.approx(0.02 ** -2 - 1)
    assert gamma == pytest.approx(1 - 0.02 ** 2)
    assert symflow.disc_beta(0.5, 2.0) == pytest.approx(0.5)


def test_lattice_round_trip():
    lat = np.array([[4.0, 0, 0], [1.0, 5.0, 0], [0.5, 0.3, 6.0]])
    k, q = symflow.encode_lattice(lat)
    assert len(k) == 6
    assert np.allclose(symflow.decode_lattice(k) @ q.T, lat)
    masked = symflow.mask_k(k, 225)
    assert masked[:5] == [0.0] * 5
    assert symflow.mask_k(k, 194)[0] == pytest.approx(-math.log(3) / 4)


def test_symmetry_round_trip():
    crystal, sg = rocksalt()
    assert sg == 225
    assert len(crystal) == 8
    assert len(symflow.space_group_ops(225)) == 192
    unit = symflow.extract_asymmetric_unit(crystal, sg)
    assert len(unit.sites) == 2
    assert all(len(s.site_symmetry) == 15 for s in unit.sites)
    back = symflow.reconstruct_unit_cell(unit)
    assert len(back) == 8
    assert symflow.structure_match(crystal, back)


def test_cif_and_metrics():
    crystal, _ = rocksalt()
    text = symflow.write_cif(crystal, 225, "nacl")
    again, sg = symflow.parse_cif(text)
    assert sg == 225
    assert np.allclose(again.lattice, crystal.lattice, atol=1e-5)
    assert symflow.structural_validity(crystal)
    assert symflow.charge_neutrality(crystal) == "neutral"
    assert symflow.density(crystal) == pytest.approx(2.165, rel=5e-3)
    assert symflow.wasserstein_1d([0.0, 1.0], [1.0, 2.0]) == 1.0
    with pytest.raises(symflow.InputError):
        symflow.parse_cif("data_x\n")


def test_crystal_construction():
    c = symflow.Crystal(3.0 * np.eye(3), [29], np.array([[0.2, 0.3, 0.4]]))
    assert c.frac.shape == (1, 3)
    assert c.volume == pytest.approx(27.0)
    with pytest.raises(symflow.InputError):
        symflow.Crystal(np.eye(3), [1, 2], np.zeros((1, 3)))


def test_train_sample_evaluate(tmp_path):
    manifest = symflow.ingest_prototypes()
    assert len(manifest) == 5
    assert manifest.num_classes == 55
    config = {"epochs": "5", "hidden_dim": "16", "embed_dim": "8", "num_layers": "2",
              "fourier_order": "2", "seed": "1"}
    seen = []
    ck, curve = symflow.train(manifest, config, lambda e, loss: seen.append(e))
    assert seen == [1, 2, 3, 4, 5]
    assert [r["epoch"] for r in curve] == seen
    assert all(math.isfinite(r["total"]) for r in curve)
    ck.save(str(tmp_path / "ck.bin"))
    loaded = symflow.Checkpoint.load(str(tmp_path / "ck.bin"))
    assert loaded.num_params == ck.num_params
    assert loaded.config["epochs"] == "5"

    samples = symflow.generate(loaded, n_steps=10, count=6, seed=2)
    assert [s.index for s in samples] == list(range(6))
    for s in samples:
        assert (s.crystal is None) == bool(s.error)
        for site in s.unit.sites:
            assert all(0.0 <= v < 1.0 for v in site.frac)
    again = symflow.generate(loaded, n_steps=10, count=6, seed=2)
    assert [s.unit.k for s in again] == [s.unit.k for s in samples]
    with pytest.raises(symflow.InputError):
        symflow.generate(loaded, n_steps=5, target=3.0)

    ref = [(e.name, symflow.reconstruct_unit_cell(e.unit), e.unit.sg) for e in manifest.entries]
    report = symflow.evaluate(ref, ref)
    assert report["novelty"] == 0.0
    assert report["jsd_spacegroup"] == 0.0
    assert report["wdist_density"] == 0.0


def test_bad_config_key():
    with pytest.raises(symflow.InputError, match="bogus"):
        symflow.train(symflow.ingest_prototypes(), {"bogus": "1"})
