import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualgen.errors import EmptyCatalogError
from dualgen.geo import (
    Catalog,
    EarthModel,
    GeoPoint,
    ViewpointRecord,
    bridge_lookup,
    haversine_distance,
    nearest_viewpoints,
    normalize_lon,
)
from dualgen.geocoder import Gazetteer

# Frozen from scripts/geodesic_oracle.py (50-digit vector-form great circle, R = 6371 km).
ORACLE_PAIRS = [
    ((29.6579, 91.117), (29.6525, 91.1316), 1.5332688890499824059),
    ((29.6579, 91.117), (29.2686, 88.8697), 221.8310717443846523),
    ((29.6579, 91.117), (30.75, 90.6), 131.20581855537332139),
    ((0.0, 0.0), (0.0, 90.0), 10007.543398010286361),
    ((0.0, 0.0), (1.0, 1.0), 157.24938127194397487),
    ((51.5007, -0.1246), (40.6892, -74.0445), 5574.8404568485538458),
    ((-33.8568, 151.2153), (35.6586, 139.7454), 7821.161137980708309),
    ((89.9, 0.0), (-89.9, 180.0), 20015.086796020572722),
    ((10.0, 179.5), (-10.0, -179.5), 2226.6484216904881862),
    ((45.0, 45.0), (-45.0, -135.0), 20015.086796020572722),
    ((29.6579, 91.117), (29.65791, 91.11701), 0.0014731346343064341739),
    ((-90.0, 0.0), (90.0, 0.0), 20015.086796020572722),
    ((10.0, 20.0), (-9.9995, -160.0005), 20015.008764276621314),
]

lat_st = st.floats(-90, 90, allow_nan=False)
lon_st = st.floats(-180, 180, allow_nan=False, exclude_min=True)
point_st = st.builds(GeoPoint, lat_st, lon_st)


def vp(name, lat, lon):
    return ViewpointRecord(name, GeoPoint(lat, lon), f"about {name}")


class TestGeoPoint:
    def test_lon_normalized(self):
        assert GeoPoint(0, -180).lon == 180
        assert GeoPoint(0, 190).lon == pytest.approx(-170)
        assert GeoPoint(0, 540).lon == 180

    @pytest.mark.parametrize("lat", [-90.0001, 91, float("nan")])
    def test_bad_lat(self, lat):
        with pytest.raises(ValueError):
            GeoPoint(lat, 0)

    @given(st.floats(-1e4, 1e4, allow_nan=False))
    def test_normalize_range(self, lon):
        assert -180 < normalize_lon(lon) <= 180


class TestHaversine:
    @pytest.mark.parametrize("p,q,expected", ORACLE_PAIRS)
    def test_against_oracle(self, p, q, expected):
        d = haversine_distance(GeoPoint(*p), GeoPoint(*q))
        assert abs(d - expected) <= 1e-9 * expected

    def test_identity(self):
        p = GeoPoint(29.6579, 91.1170)
        assert haversine_distance(p, p) == 0.0

    def test_equator_antipode(self):
        assert haversine_distance(GeoPoint(0, 0), GeoPoint(0, 180)) == pytest.approx(math.pi * 6371, abs=1e-6)

    def test_potala_jokhang_is_about_1_5_km(self):
        d = haversine_distance(GeoPoint(29.6579, 91.1170), GeoPoint(29.6525, 91.1316))
        assert d == pytest.approx(1.533, abs=1e-3)

    def test_radius_scales(self):
        p, q = GeoPoint(10, 10), GeoPoint(-20, 40)
        assert haversine_distance(p, q, EarthModel(1.0)) * 6371 == pytest.approx(haversine_distance(p, q))

    def test_earth_model_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            EarthModel(0)

    @given(point_st, point_st)
    def test_symmetric_and_bounded(self, p, q):
        d = haversine_distance(p, q)
        assert d == haversine_distance(q, p)
        assert 0 <= d <= math.pi * 6371 + 1e-9

    @settings(max_examples=300)
    @given(point_st, point_st, point_st)
    def test_triangle_inequality(self, p, q, r):
        assert haversine_distance(p, r) <= haversine_distance(p, q) + haversine_distance(q, r) + 1e-6


class TestNearest:
    def test_query_on_viewpoint(self):
        vps = [vp("A", 29.0, 91.0), vp("B", 29.5, 91.5), vp("C", 30, 92)]
        res = nearest_viewpoints(GeoPoint(29.5, 91.5), vps, 2)
        assert res[0].name == "B" and res[0].distance_km == 0.0

    def test_six_fixture_matches_bruteforce(self):
        vps = [vp(n, lat, lon) for n, lat, lon in [
            ("a", 29.65, 91.10), ("b", 29.70, 91.13), ("c", 29.60, 91.20),
            ("d", 29.66, 91.12), ("e", 30.00, 91.00), ("f", 29.65, 91.14)]]
        q = GeoPoint(29.6579, 91.1170)
        brute = sorted(vps, key=lambda v: (haversine_distance(q, v.location), v.name))[:5]
        assert [r.name for r in nearest_viewpoints(q, vps, 5)] == [v.name for v in brute]
        assert "e" not in [r.name for r in nearest_viewpoints(q, vps, 5)]

    def test_k_exceeds_size(self):
        vps = [vp("A", 1, 1), vp("B", 2, 2), vp("C", 3, 3)]
        res = nearest_viewpoints(GeoPoint(0, 0), vps, 10)
        assert [r.name for r in res] == ["A", "B", "C"]

    def test_ties_broken_by_name(self):
        vps = [vp("zeta", 1, 0), vp("alpha", -1, 0), vp("mid", 0, 1)]
        res = nearest_viewpoints(GeoPoint(0, 0), vps, 3)
        assert [r.name for r in res] == ["alpha", "mid", "zeta"]

    def test_empty(self):
        with pytest.raises(EmptyCatalogError):
            nearest_viewpoints(GeoPoint(0, 0), [], 5)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            nearest_viewpoints(GeoPoint(0, 0), [vp("A", 0, 0)], 0)

    @settings(max_examples=50)
    @given(st.integers(1, 40), st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 8))
    def test_prefix_monotone(self, n, seed, k1, k2):
        rng = random.Random(seed)
        vps = [vp(f"v{i}", rng.uniform(-60, 60), rng.uniform(-179, 180)) for i in range(n)]
        q = GeoPoint(rng.uniform(-60, 60), rng.uniform(-179, 180))
        small, big = sorted((k1, k2))
        assert nearest_viewpoints(q, vps, small) == nearest_viewpoints(q, vps, big)[:small]

    def test_catalog_rejects_duplicates(self):
        with pytest.raises(ValueError):
            Catalog([vp("A", 0, 0), vp("A", 1, 1)])


class TestBridgeLookup:
    @pytest.fixture
    def gaz(self):
        return Gazetteer({"Potala Palace": GeoPoint(29.6579, 91.1170), "Somewhere": GeoPoint(29.7, 91.0)})

    @pytest.fixture
    def vps(self):
        return [vp("Potala Palace", 29.6579, 91.1170), vp("Jokhang Temple", 29.6525, 91.1316),
                vp("Sera Monastery", 29.6992, 91.1339), vp("Norbulingka", 29.6546, 91.0938),
                vp("Drepung Monastery", 29.6759, 91.0487), vp("Ganden Monastery", 29.7570, 91.4740)]

    def test_document(self, gaz, vps):
        doc = bridge_lookup("Potala Palace", vps, gaz, 5)
        assert doc.startswith('{"query_keyword": "Potala Palace", "resolved": {"lat": 29.657900, "lon": 91.117000}')
        data = json.loads(doc)
        assert [r["name"] for r in data["results"]] == [
            r.name for r in nearest_viewpoints(GeoPoint(29.6579, 91.1170), vps, 5)
        ]
        assert '"distance_km": 0.000' in doc
        assert list(data) == ["query_keyword", "resolved", "results"]
        assert list(data["results"][0]) == ["name", "distance_km", "lat", "lon"]

    def test_round_trip_precision(self, gaz, vps):
        data = json.loads(bridge_lookup("Somewhere", vps, gaz, 5))
        q = GeoPoint(29.7, 91.0)
        for r, ref in zip(data["results"], nearest_viewpoints(q, vps, 5)):
            assert r["distance_km"] == round(ref.distance_km, 3)
            assert r["lat"] == round(ref.location.lat, 6)

    def test_byte_stable(self, gaz, vps):
        assert bridge_lookup("Somewhere", vps, gaz) == bridge_lookup("Somewhere", list(reversed(vps)), gaz)

    def test_not_found(self, gaz, vps):
        assert json.loads(bridge_lookup("zzz-nowhere", vps, gaz)) == {"error": "not_found", "keyword": "zzz-nowhere"}
