"""
Reading quadruple files
=======================

Datasets are directories with ``train.txt``, ``valid.txt`` and ``test.txt``
holding one ``subject relation object time`` event per line. Raw time stamps
are divided by the dataset's time quantum, found as the gcd of all stamps.
"""

import os
import sys
import tempfile

from grouptkg.data import dataset_stats, load_dataset, make_window, save_dataset, synth_periodic_tkg

# pass a directory on the command line to inspect a real release
if len(sys.argv) > 1:
    directory = sys.argv[1]
else:
    directory = tempfile.mkdtemp()
    toy = synth_periodic_tkg(12, 5, 3, 30, seed=4)
    toy.granularity = 24  # write hour stamps, like the daily ICEWS releases
    save_dataset(toy, directory)
    print("wrote a toy dataset to", directory)
    with open(os.path.join(directory, "train.txt")) as f:
        print("first lines:", [next(f).strip() for _ in range(3)])

ds = load_dataset(directory)
for key, value in dataset_stats(ds).items():
    print(f"  {key:<12}{value}")

###############################################################################
# A window holds the snapshots just before a target timestep and the entity
# pairs to score at that timestep.

t = ds.timesteps("valid")[0]
win = make_window(ds, t, w=7, split="valid")
print(f"target t={t}: history {win.timesteps}, {len(win.pairs)} query pairs")
print("first query", win.pairs[0].tolist(), "labels", win.labels[0].tolist())
