#!/usr/bin/env python3
# Copyright 2026 The bostop Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ==============================================================================
"""Stand-in for a training job: a noisy bowl over the xgb_space.json dims.

Reads one request line, prints one response line with per-fold losses.
"""
import json
import math
import random
import sys

req = json.loads(sys.stdin.readline())
c = req["candidate"]
rng = random.Random(req["seed"] * 100003 + req["iteration"])
base = (
    0.10
    + 0.05 * (math.log10(c["eta"]) + 1.0) ** 2
    + 0.002 * (round(c["max_depth"]) - 6) ** 2
    + 0.04 * (c["subsample"] - 0.8) ** 2
    + 0.001 * math.log10(c["lambda"]) ** 2
)
k = max(int(req["folds"]), 2)
folds = [base + rng.gauss(0.0, 0.01) for _ in range(k)]
print(json.dumps({
    "y": sum(folds) / k,
    "fold_values": folds,
    "test_metric": base + rng.gauss(0.0, 0.005),
    "eval_seconds": 5.0 + 2.0 * round(c["max_depth"]),
}))
