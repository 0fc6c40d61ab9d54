#!/usr/bin/env python3
"""Generate the TB ontology skeleton (onto/tb_skeleton.nt) and its expected
schema counts (onto/manifest.json) from the rule files and the RDF vocabulary
table in src/rdf/vocabulary.cpp."""

import argparse
import json
import re
from pathlib import Path

NS = "http://tbstream.example/onto#"
RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
OWL = "http://www.w3.org/2002/07/owl#"
XSD = "http://www.w3.org/2001/XMLSchema#"

# Continuant/occurrent spine plus the clinical mid-level classes.
SPINE = [
    ("Entity", None),
    ("Continuant", "Entity"),
    ("Occurrent", "Entity"),
    ("IndependentContinuant", "Continuant"),
    ("DependentContinuant", "Continuant"),
    ("Process", "Occurrent"),
    ("Person", "IndependentContinuant"),
    ("TBPatient", "Person"),
    ("ClinicalEntity", "IndependentContinuant"),
    ("DiagnosticTest", "ClinicalEntity"),
    ("Treatment", "ClinicalEntity"),
    ("Disease", "DependentContinuant"),
    ("Tuberculosis", "Disease"),
]
DISJOINT = [("Continuant", "Occurrent"), ("Person", "ClinicalEntity")]
INDIVIDUAL_CLASS = {"antibiotics": "Treatment"}  # everything else is a test
ATOM = re.compile(r"([A-Za-z_][\w:]*)\(([^()]*)\)")
VOCAB = re.compile(r'\{"(\w+)", "(\w+)", "(\w*)"\}')


def parse_vocabulary(path):
    return {m.group(1): m.group(2) for m in VOCAB.finditer(path.read_text())}


def rule_atoms(rule_dir):
    for f in sorted(rule_dir.glob("*.swrlx")):
        for line in f.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("@"):
                continue
            for name, args in ATOM.findall(line):
                if name.startswith("swrlb:"):
                    continue
                yield name, [a.strip() for a in args.split(",")]


def literal_kind(arg):
    if arg.startswith('"'):
        return "string"
    if arg in ("true", "false"):
        return "boolean"
    if re.fullmatch(r"-?\d+(\.\d+)?", arg):
        return "decimal"
    if arg.startswith("?"):
        return None
    return "individual"


def build(rule_dir, vocab_cpp):
    vocab = parse_vocabulary(vocab_cpp)
    rdf_name = lambda n: vocab.get(n, n)
    label_classes, obj_props, data_props = set(), set(), {}
    individuals = {}
    for name, args in rule_atoms(rule_dir):
        if len(args) == 1:
            if name != "Patient":
                label_classes.add(name)
            continue
        kind = literal_kind(args[1])
        prop = rdf_name(name)
        if kind == "individual":
            obj_props.add(prop)
            individuals[args[1]] = INDIVIDUAL_CLASS.get(args[1], "DiagnosticTest")
        elif kind is not None:
            data_props.setdefault(prop, kind)
        else:
            data_props.setdefault(prop, None)
    for prop in obj_props:
        data_props.pop(prop, None)
    # Store vocabulary that no rule mentions.
    for rule_name, local in vocab.items():
        if local not in obj_props:
            data_props.setdefault(local, None)

    classes = {c: parent for c, parent in SPINE}
    for c in sorted(label_classes):
        classes.setdefault(c, "TBPatient")

    triples = []
    iri = lambda local: f"<{NS}{local}>"
    a = f"<{RDF}type>"
    for c, parent in classes.items():
        triples.append(f"{iri(c)} {a} <{OWL}Class> .")
        if parent:
            triples.append(f"{iri(c)} <{RDFS}subClassOf> {iri(parent)} .")
    for x, y in DISJOINT:
        triples.append(f"{iri(x)} <{OWL}disjointWith> {iri(y)} .")
    for p in sorted(obj_props):
        triples.append(f"{iri(p)} {a} <{OWL}ObjectProperty> .")
        triples.append(f"{iri(p)} <{RDFS}domain> {iri('TBPatient')} .")
        triples.append(f"{iri(p)} <{RDFS}range> {iri('ClinicalEntity')} .")
    for p in sorted(data_props):
        triples.append(f"{iri(p)} {a} <{OWL}DatatypeProperty> .")
        triples.append(f"{iri(p)} <{RDFS}domain> {iri('TBPatient')} .")
        kind = data_props[p]
        if kind:
            triples.append(f"{iri(p)} <{RDFS}range> <{XSD}{kind}> .")
    for ind in sorted(individuals):
        triples.append(f"{iri(ind)} {a} <{OWL}NamedIndividual> .")
        triples.append(f"{iri(ind)} {a} {iri(individuals[ind])} .")
    triples.append(f"<{RDFS}label> {a} <{OWL}AnnotationProperty> .")
    triples.append(f'{iri("TBPatient")} <{RDFS}label> "TB patient" .')

    counts = {
        "classes": len(classes),
        "object_properties": len(obj_props),
        "data_properties": len(data_props),
        "individuals": len(individuals),
        "subclass_axioms": sum(1 for p in classes.values() if p),
        "classes_with_instances": len(set(individuals.values())),
        "equivalent_class_axioms": 0,
        "disjoint_class_axioms": len(DISJOINT),
        "annotation_properties": 1,
    }
    return sorted(set(triples)), counts


def main():
    root = Path(__file__).resolve().parent.parent
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rules", type=Path, default=root / "rules")
    ap.add_argument("--vocabulary", type=Path, default=root / "src/rdf/vocabulary.cpp")
    ap.add_argument("--out", type=Path, default=root / "onto")
    args = ap.parse_args()
    triples, counts = build(args.rules, args.vocabulary)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "tb_skeleton.nt").write_text("\n".join(triples) + "\n")
    (args.out / "manifest.json").write_text(json.dumps({"file": "tb_skeleton.nt", "counts": counts}, indent=2) + "\n")
    print(json.dumps(counts))


if __name__ == "__main__":
    main()
