"""Independent re-evaluations of the model formulas.

Written straight from the formula definitions with plain Python and no
imports from the package, so agreement with the package is a real check.
"""

from __future__ import annotations

import math
from fractions import Fraction


def rssi(tx_dbm, d, n):
    d = max(d, 1.0)
    return tx_dbm - 10 * n * math.log10(d)


def distance(tx_dbm, rssi_dbm, n):
    return 10 ** ((tx_dbm - rssi_dbm) / (10 * n))


def link_quality(b_channel, neighbour_traffic):
    total = 0.0
    for t in neighbour_traffic:
        total += t
    return max(0.0, b_channel - total)


def packets(data_bits, pkt_bits, header_bits):
    # exact rational ceiling, immune to float rounding
    if data_bits <= 0:
        return 0
    q = Fraction(data_bits) / Fraction(pkt_bits - header_bits)
    return math.ceil(q)


def dtt_hop(n_packets, avg_dl, pkt_bits, lq):
    return n_packets * pkt_bits / lq + avg_dl * pkt_bits / lq


def dtt(data_bits, hops, pkt_bits, header_bits):
    """hops: list of (link quality, avg dropped+lost)."""
    p = packets(data_bits, pkt_bits, header_bits)
    if p == 0:
        return 0.0
    t = 0.0
    for lq, dl in hops:
        t += dtt_hop(p, dl, pkt_bits, lq)
    return t


def e_pt(instr, cpi, cct):
    return instr * cpi * cct


def e_pte(total, executed, cpi, cct):
    return (total - executed) * cpi * cct


def e_qt(executing, queued, cpi, cct, phi):
    res = 0.0 if executing is None else e_pte(executing[0], executing[1], cpi, cct)
    waiting = 0.0
    for i in queued:
        waiting += i * cpi * cct
    return res + waiting + (len(queued) + 2) * phi


def e_ct(instr, cpi, cct, phi, executing, queued, dtt_total):
    return e_pt(instr, cpi, cct) + e_qt(executing, queued, cpi, cct, phi) + dtt_total


def alpha(p_static, gates, cap, volt, freq):
    return p_static + gates * cap * volt * volt * freq


def e_ec(a, ept, beta, n_packets):
    return a * ept + beta * n_packets


def atct(times):
    return math.fsum(times)
