"""Fix a binary point, solve the inner SDP and turn its dual into cuts."""
import numpy as np

from specoa.conic import extract_dual_certificate, solve_inner_sdp
from specoa.cuts import disaggregate_linear, disaggregate_soc
from specoa.instances import gen_qkp
from specoa.model import bqcqp_to_bsdp, lift

inst = bqcqp_to_bsdp(gen_qkp(6, 0.8, seed=1))
x = np.array([1.0, 0.0, 1.0, 0.0, 0.0, 1.0])
res = solve_inner_sdp(inst, x)
print("status", res.status, "value", inst.user_value(res.value))

S = extract_dual_certificate(res)
print("certificate eigenvalues", np.round(np.linalg.eigvalsh(S), 6))
print("<S, lift(xx', x)> =", float(np.sum(S * lift(np.outer(x, x), x))))
print(len(disaggregate_linear(S)), "linear cuts,", len(disaggregate_soc(S)), "SOC cuts")
