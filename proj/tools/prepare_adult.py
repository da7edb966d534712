#!/usr/bin/env python3
# Copyright 2026 The tabsan Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Converts the raw UCI Adult files (adult.data, adult.test) into data/adult.csv.

The output keeps '?' markers (the loader drops those rows and reports the
count), drops the fnlwgt survey weight, renames `sex` to `gender` and strips
the trailing '.' that adult.test appends to income labels.
"""

import argparse
import csv
import sys

RAW_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]
OUT_COLUMNS = [
    "age", "workclass", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "gender", "capital-gain",
    "capital-loss", "hours-per-week", "native-country", "income",
]


def read_raw(path):
    with open(path, newline="") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            fields = [v.strip() for v in line.split(",")]
            if len(fields) != len(RAW_COLUMNS):
                raise ValueError(f"{path}: unexpected field count: {line!r}")
            row = dict(zip(RAW_COLUMNS, fields))
            row["gender"] = row.pop("sex")
            row["income"] = row["income"].rstrip(".")
            yield row


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("inputs", nargs="+", help="adult.data / adult.test")
    parser.add_argument("-o", "--output", default="data/adult.csv")
    args = parser.parse_args()

    count = 0
    with open(args.output, "w", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(OUT_COLUMNS)
        for path in args.inputs:
            for row in read_raw(path):
                writer.writerow([row[c] for c in OUT_COLUMNS])
                count += 1
    print(f"wrote {count} rows to {args.output}", file=sys.stderr)


if __name__ == "__main__":
    main()
