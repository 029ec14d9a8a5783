"""Verifica refined.json: mantidas + rejeitadas = deteções de entrada, por imagem.

Uso: python scripts/check_conservation.py <run>/refined.json <fixtures>/detections.json
Sai com 0 se tudo bate certo, 2 se houver discrepâncias.
"""

import json
import os
import sys


def load(path):
    with open(path, encoding="utf-8") as fh:
        return {record["image"]: record for record in json.load(fh)}


if len(sys.argv) != 3:
    print(__doc__)
    sys.exit(1)

refined = load(sys.argv[1])
detections = load(sys.argv[2])

mismatches = []
for image, record in sorted(detections.items()):
    expected = list(range(len(record.get("detections", []))))
    out = refined.get(image)
    if out is None:
        mismatches.append((image, "missing", expected, []))
        continue
    found = sorted(d["index"] for d in out["kept"] + out["rejected"])
    if found != expected:
        mismatches.append((image, "indices", expected, found))

extra = sorted(set(refined) - set(detections))
for image in extra:
    mismatches.append((image, "unexpected", [], []))

print("Images checked:", len(detections))
print("Mismatches found:", len(mismatches))
for idx, (image, kind, expected, found) in enumerate(mismatches[:20], start=1):
    print(f"{idx}. {os.path.basename(sys.argv[1])}:{image} {kind} expected={expected} found={found}")

sys.exit(2 if mismatches else 0)
