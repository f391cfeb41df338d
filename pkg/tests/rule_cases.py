"""Hand-derived stamping cases: each rule seen both firing and not firing.

Each case is (name, pub, lt, bma, expected cells, expected rules).
"""

H, M, L = "High", "Medium", "Low"

RULE_CASES = [
    ("r1_pub_only", {"c23n"}, [], [], {"c23n"}, {1}),
    ("r6_nothing", None, [], [], set(), {6}),
    ("r1_r2_prefix_agrees", {"c23n"}, [("c22y", "sammamish")], [], {"c23n", "c22y"}, {1, 2}),
    ("r2_r3_no_prefix", {"9q5c"}, [("c22y", "x")], [("c23n", M)], {"9q5c"}, {1}),
    ("r1_r3_medium_counts", {"c23n"}, [], [("c22y", M), ("c22z", L)], {"c23n", "c22y"}, {1, 3}),
    ("r3_low_ignored", {"c23n"}, [], [("c22y", L)], {"c23n"}, {1}),
    ("r4_lt_bma_agree", None, [("c22y", "x")], [("c23n", H)], {"c22y", "c23n"}, {4}),
    ("r4_stamps_all_lt", None, [("c22y", "x"), ("9q5c", "y")], [("c23n", M)], {"c22y", "9q5c", "c23n"}, {4}),
    ("r4_no_agreement", None, [("c22y", "x")], [("9q5c", H)], set(), {6}),
    ("r5_high_only", None, [], [("c23n", H), ("9q5c", M)], {"c23n"}, {5}),
    ("r5_medium_not_enough", None, [], [("c23n", M)], set(), {6}),
    ("r1_r2_r3_union", {"c23n"}, [("c22y", "x")], [("c2b0", H), ("9q5c", H)],
     {"c23n", "c22y", "c2b0", "9q5c"}, {1, 2, 3}),
]
