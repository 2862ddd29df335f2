"""Reference great-circle distances computed independently of the haversine code.

Uses the 3-D unit-vector form d = R * atan2(|u x v|, u . v) at 50-digit
precision. Prints a Python literal suitable for freezing into a test.
"""

import mpmath as mp

mp.mp.dps = 50
R = mp.mpf(6371)

PAIRS = [
    ((29.6579, 91.1170), (29.6525, 91.1316)),   # Potala Palace - Jokhang Temple
    ((29.6579, 91.1170), (29.2686, 88.8697)),   # Potala Palace - Tashilhunpo
    ((29.6579, 91.1170), (30.75, 90.6)),        # Potala Palace - Namtso
    ((0.0, 0.0), (0.0, 90.0)),
    ((0.0, 0.0), (1.0, 1.0)),
    ((51.5007, -0.1246), (40.6892, -74.0445)),  # London - New York
    ((-33.8568, 151.2153), (35.6586, 139.7454)),  # Sydney - Tokyo
    ((89.9, 0.0), (-89.9, 180.0)),
    ((10.0, 179.5), (-10.0, -179.5)),           # across the antimeridian
    ((45.0, 45.0), (-45.0, -135.0)),            # antipodal
    ((29.6579, 91.1170), (29.65791, 91.11701)), # ~1.4 m apart
    ((-90.0, 0.0), (90.0, 0.0)),
    ((10.0, 20.0), (-9.9995, -160.0005)),     # nearly antipodal
]


def unit(lat, lon):
    phi, lam = mp.radians(mp.mpf(lat)), mp.radians(mp.mpf(lon))
    return mp.matrix([mp.cos(phi) * mp.cos(lam), mp.cos(phi) * mp.sin(lam), mp.sin(phi)])


def distance(p, q):
    u, v = unit(*p), unit(*q)
    cross = mp.matrix([u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]])
    dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
    return R * mp.atan2(mp.norm(cross), dot)


if __name__ == "__main__":
    print("ORACLE_PAIRS = [")
    for p, q in PAIRS:
        print(f"    ({p}, {q}, {mp.nstr(distance(p, q), 20)}),")
    print("]")
