"""
Policies as expression trees
============================

An evolved policy is an expression over ten state features and one random
constant. It scores every candidate at once, and the highest score is observed.
"""

import numpy as np

from uaeos.policy import FEATURES, evaluate, parse, serialize

tree = parse("(+ RP (max EMO RMP))")
print(serialize(tree))
print(evaluate(tree, {"RP": 0.2, "EMO": 0.3, "RMP": 0.5}))

# division by zero and overflow give 1 at that node instead of inf or nan
print(evaluate(parse("(/ RP 0.0)"), {"RP": 0.4}))

# features are arrays over the candidate pool, so one call scores the pool
pool = {name: np.linspace(0.0, 1.0, 4) for name in FEATURES}
print(evaluate(parse("(- (sin RPPU) TIST)"), pool))

# constants keep full precision through text
text = serialize(parse("(* TIST 0.30000000000000004)"))
print(text, parse(text) == parse(text))
