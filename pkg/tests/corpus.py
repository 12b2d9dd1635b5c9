"""Hand-written ``.circ`` sources used by the round-trip tests."""

from __future__ import annotations

from hardyweave.dsl import bundled_circuit_text

SINGLE_LASER = """
mode a
laser a amp=0.2
detector a
"""

HOM_DIP = """
mode a
mode b
mode c
mode d
laser a amp=0.1
laser b amp=0.1
bs a b -> c d matrix=final
detector c
detector d
"""

MACH_ZEHNDER = """
mode s
mode v
mode u
mode p
mode c
mode d
laser s amp=0.3
bs s -> v u
mirror u -> p phase=-1
bs p v -> c d
detector c
detector d
"""

PHASE_IN_PLACE = """
mode a
laser a amp=0.1-0.2i
mirror a -> a phase=i
mirror a -> a phase=0.6+0.8i
detector a
"""

BARE_CRYSTAL = """
mode F
mode s
mode i
laser F amp=0.5 nmax=2
crystal F -> s i q=1e-3
detector s
detector i
"""

EXACT_CRYSTAL = """
mode F
mode s
mode i
laser F amp=0.1
crystal F -> s i q=0.2 order=exact
detector s
detector i
"""

PINHOLE_RELABEL = """
mode F
mode s
mode i
mode s2
mode i2
laser F amp=0.2
crystal F -> s i q=2e-3i
pinhole s -> s2
pinhole i -> i2
detector s2
detector i2
"""

CONSTRAINED = """
mode S_in
mode I_in
mode u_S
mode v_S
mode u_I
mode v_I
mode F
laser S_in amp=0.02
laser I_in amp=0.02
laser F amp=0.2
bs S_in -> v_S u_S matrix=input
bs I_in -> v_I u_I matrix=input
crystal F -> u_S u_I q=1e-3
constraint condition5 tol=1e-6
detector u_S
detector v_S
detector u_I
detector v_I
"""

MODES_ONLY = """
mode x
mode y
"""

EMPTY = ""

COMMENTED = """
# a two-laser interferometer with trailing comments
mode a   # first input
mode b
mode c
mode d
laser a amp=+1e-1      # signal
laser b amp=-.05i
bs a b -> c d matrix=input
detector c
detector d
"""

CORPUS = {
    "hardy": bundled_circuit_text(),
    "single_laser": SINGLE_LASER,
    "hom_dip": HOM_DIP,
    "mach_zehnder": MACH_ZEHNDER,
    "phase_in_place": PHASE_IN_PLACE,
    "bare_crystal": BARE_CRYSTAL,
    "exact_crystal": EXACT_CRYSTAL,
    "pinhole_relabel": PINHOLE_RELABEL,
    "constrained": CONSTRAINED,
    "modes_only": MODES_ONLY,
    "empty": EMPTY,
    "commented": COMMENTED,
}
