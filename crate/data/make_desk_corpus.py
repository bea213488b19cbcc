#!/usr/bin/env python3
"""Generates data/desk_corpus.jsonl: 100 Java methods with NL queries.

Twenty method templates are each instantiated five times with different
domain nouns, so structure repeats while identifiers and literals vary.
Output is deterministic.
"""

import json
import random
import re
from pathlib import Path

SEED = 20240613

NOUNS = [
    "customer", "order", "invoice", "product", "account", "user", "session", "payment",
    "ticket", "shipment", "employee", "report", "device", "sensor", "vehicle", "booking",
    "message", "document", "profile", "catalog", "warehouse", "supplier", "contract", "policy",
    "patient", "course", "student", "library", "playlist", "track", "album", "camera",
    "printer", "router", "server", "cluster", "bucket", "queue", "channel", "widget",
    "ledger", "budget", "vendor", "coupon", "station", "flight", "airport", "hotel",
    "recipe", "garden",
]
ATTRS = [
    "name", "price", "weight", "score", "count", "level", "rating", "balance", "height",
    "width", "limit", "total", "amount", "speed", "age", "capacity", "priority", "distance",
    "duration", "quantity",
]


def cap(s):
    return s[0].upper() + s[1:]


def t_getter(n, a, r):
    return (f"get the {a} of the {n}",
            f"public int get{cap(n)}{cap(a)}() {{\n    return this.{n}{cap(a)};\n}}")


def t_setter(n, a, r):
    return (f"set the {a} of the {n}",
            f"public void set{cap(n)}{cap(a)}(int {a}) {{\n    this.{n}{cap(a)} = {a};\n}}")


def t_sum(n, a, r):
    return (f"compute the total {a} of all {n}s",
            f"public static int total{cap(a)}(int[] {n}{cap(a)}s) {{\n"
            f"    int sum = 0;\n"
            f"    for (int i = 0; i < {n}{cap(a)}s.length; i++) {{\n"
            f"        sum += {n}{cap(a)}s[i];\n"
            f"    }}\n"
            f"    return sum;\n}}")


def t_max(n, a, r):
    return (f"find the maximum {a} among {n}s",
            f"public static int max{cap(n)}{cap(a)}(int[] values) {{\n"
            f"    int best = values[0];\n"
            f"    for (int v : values) {{\n"
            f"        if (v > best) {{\n"
            f"            best = v;\n"
            f"        }}\n"
            f"    }}\n"
            f"    return best;\n}}")


def t_contains(n, a, r):
    return (f"check whether the list contains the {n}",
            f"public boolean has{cap(n)}(List<String> {n}s, String {a}) {{\n"
            f"    return {n}s != null && {n}s.contains({a});\n}}")


def t_average(n, a, r):
    return (f"return the average {a} of the {n}s",
            f"public double average{cap(a)}(List<{cap(n)}> {n}s) {{\n"
            f"    if ({n}s.isEmpty()) {{\n"
            f"        return 0.0;\n"
            f"    }}\n"
            f"    double sum = 0;\n"
            f"    for ({cap(n)} item : {n}s) {{\n"
            f"        sum += item.get{cap(a)}();\n"
            f"    }}\n"
            f"    return sum / {n}s.size();\n}}")


def t_parse(n, a, r):
    d = r.randint(1, 99)
    return (f"parse the {n} {a} from text with a default",
            f"public static int parse{cap(n)}{cap(a)}(String text) {{\n"
            f"    try {{\n"
            f"        return Integer.parseInt(text.trim());\n"
            f"    }} catch (NumberFormatException e) {{\n"
            f"        return {d};\n"
            f"    }}\n}}")


def t_filter(n, a, r):
    k = r.randint(2, 500)
    return (f"filter {n}s whose {a} exceeds a threshold",
            f"public List<{cap(n)}> filter{cap(n)}sBy{cap(a)}(List<{cap(n)}> {n}s) {{\n"
            f"    List<{cap(n)}> result = new ArrayList<>();\n"
            f"    for ({cap(n)} {n} : {n}s) {{\n"
            f"        if ({n}.get{cap(a)}() > {k}) {{\n"
            f"            result.add({n});\n"
            f"        }}\n"
            f"    }}\n"
            f"    return result;\n}}")


def t_count_map(n, a, r):
    return (f"count {n}s grouped by {a}",
            f"public Map<String, Integer> count{cap(n)}sBy{cap(a)}(List<{cap(n)}> {n}s) {{\n"
            f"    Map<String, Integer> counts = new HashMap<>();\n"
            f"    for ({cap(n)} {n} : {n}s) {{\n"
            f"        counts.merge({n}.get{cap(a)}(), 1, Integer::sum);\n"
            f"    }}\n"
            f"    return counts;\n}}")


def t_join(n, a, r):
    sep = r.choice([", ", "; ", " | ", "-", "/"])
    return (f"join the {a}s of {n}s into one string",
            f"public String join{cap(n)}{cap(a)}s(List<String> {a}s) {{\n"
            f"    StringBuilder sb = new StringBuilder();\n"
            f"    for (int i = 0; i < {a}s.size(); i++) {{\n"
            f"        if (i > 0) {{\n"
            f"            sb.append(\"{sep}\");\n"
            f"        }}\n"
            f"        sb.append({a}s.get(i));\n"
            f"    }}\n"
            f"    return sb.toString();\n}}")


def t_equals(n, a, r):
    return (f"compare two {n}s by {a}",
            f"public static boolean same{cap(a)}({cap(n)} left, {cap(n)} right) {{\n"
            f"    if (left == null || right == null) {{\n"
            f"        return left == right;\n"
            f"    }}\n"
            f"    return left.get{cap(a)}() == right.get{cap(a)}();\n}}")


def t_factorial(n, a, r):
    return (f"compute the factorial used for {n} {a} permutations",
            f"public static long {n}{cap(a)}Factorial(int k) {{\n"
            f"    if (k <= 1) {{\n"
            f"        return 1;\n"
            f"    }}\n"
            f"    return k * {n}{cap(a)}Factorial(k - 1);\n}}")


def t_swap(n, a, r):
    return (f"swap two {n} entries in the array",
            f"public static void swap{cap(n)}s({cap(n)}[] {n}s, int i, int j) {{\n"
            f"    {cap(n)} tmp = {n}s[i];\n"
            f"    {n}s[i] = {n}s[j];\n"
            f"    {n}s[j] = tmp;\n}}")


def t_reverse(n, a, r):
    return (f"reverse the {n} {a} string",
            f"public String reverse{cap(n)}{cap(a)}(String {a}) {{\n"
            f"    return new StringBuilder({a}).reverse().toString();\n}}")


def t_clamp(n, a, r):
    lo, hi = sorted(r.sample(range(0, 1000), 2))
    return (f"clamp the {a} of a {n} to the allowed range",
            f"public static int clamp{cap(n)}{cap(a)}(int {a}) {{\n"
            f"    return Math.max({lo}, Math.min({hi}, {a}));\n}}")


def t_read_lines(n, a, r):
    ext = r.choice(["txt", "csv", "log", "dat", "tsv"])
    return (f"read all {n} lines from the {a} file",
            f"public List<String> read{cap(n)}Lines(String dir) throws IOException {{\n"
            f"    Path path = Paths.get(dir, \"{n}_{a}.{ext}\");\n"
            f"    try (BufferedReader reader = Files.newBufferedReader(path)) {{\n"
            f"        List<String> lines = new ArrayList<>();\n"
            f"        String line;\n"
            f"        while ((line = reader.readLine()) != null) {{\n"
            f"            lines.add(line);\n"
            f"        }}\n"
            f"        return lines;\n"
            f"    }}\n}}")


def t_index_of(n, a, r):
    return (f"find the index of the {n} with the given {a}",
            f"public int indexOf{cap(n)}(int[] {a}s, int target) {{\n"
            f"    for (int i = 0; i < {a}s.length; i++) {{\n"
            f"        if ({a}s[i] == target) {{\n"
            f"            return i;\n"
            f"        }}\n"
            f"    }}\n"
            f"    return -1;\n}}")


def t_is_blank(n, a, r):
    return (f"check if the {n} {a} is blank",
            f"public static boolean is{cap(n)}{cap(a)}Blank(String {a}) {{\n"
            f"    return {a} == null || {a}.trim().isEmpty();\n}}")


def t_to_string(n, a, r):
    return (f"describe the {n} as text with its {a}",
            f"@Override\npublic String toString() {{\n"
            f"    return \"{cap(n)}{{{a}=\" + {a} + \", id=\" + id + \"}}\";\n}}")


def t_countdown(n, a, r):
    step = r.randint(2, 9)
    return (f"decrease the {n} {a} until it reaches zero",
            f"public void drain{cap(n)}{cap(a)}() {{\n"
            f"    while (this.{a} > 0) {{\n"
            f"        this.{a} -= {step};\n"
            f"        log.debug(\"{n} {a} now \" + this.{a});\n"
            f"    }}\n"
            f"    this.{a} = 0;\n}}")


# Generic local names get a per-instance suffix so that identifiers rarely
# repeat across methods, as in real code.
LOCALS = [
    "sum", "best", "values", "v", "item", "result", "counts", "sb", "left", "right", "tmp",
    "text", "target", "lines", "line", "reader", "path", "dir", "k", "e", "i", "j", "id",
]
LOCAL_RE = re.compile(r'"[^"]*"|\b(' + "|".join(LOCALS) + r')\b')


def localize(code, noun, attr):
    suffix = cap(noun) + cap(attr)
    code = LOCAL_RE.sub(lambda m: m.group(1) + suffix if m.group(1) else m.group(0), code)
    # Bare attribute and noun names used as variables get a qualifier.
    for word, qual in ((attr, cap(noun)), (noun, cap(attr))):
        word_re = re.compile(r'"[^"]*"|\b' + word + r'(s?)\b')
        code = word_re.sub(lambda m: m.group(0) if m.group(0).startswith('"') else word + qual + m.group(1), code)
    return code


TEMPLATES = [
    t_getter, t_setter, t_sum, t_max, t_contains, t_average, t_parse, t_filter, t_count_map,
    t_join, t_equals, t_factorial, t_swap, t_reverse, t_clamp, t_read_lines, t_index_of,
    t_is_blank, t_to_string, t_countdown,
]


def main():
    rng = random.Random(SEED)
    records = []
    for ti, template in enumerate(TEMPLATES):
        nouns = rng.sample(NOUNS, 5)
        for k, noun in enumerate(nouns):
            attr = rng.choice(ATTRS)
            query, code = template(noun, attr, rng)
            code = localize(code, noun, attr)
            records.append({"id": f"desk-{ti:02d}-{k}", "query": query, "code": code, "lang": "java"})
    order = list(range(len(records)))
    rng.shuffle(order)
    for pos, idx in enumerate(order):
        records[idx]["split"] = "train" if pos < 70 else ("valid" if pos < 80 else "test")
    out = Path(__file__).with_name("desk_corpus.jsonl")
    with out.open("w") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=False) + "\n")


if __name__ == "__main__":
    main()
