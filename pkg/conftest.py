"""
🧪 Shared test fixtures

- The CB worked example: ontology, gold model, Steiner seed, known sources
  (NPG with the full structure, GT with materials) and their knowledge graph
- Random labelled graphs for matcher property tests
- Brute-force oracles for embeddings, frequencies, MCS and mining
"""

import random
from dataclasses import dataclass
from itertools import combinations, permutations, product
from typing import Dict, List, Sequence, Set, Tuple

import pytest

from core.labeling import CandidateTypeSet
from models.knowledge_graph import KnowledgeGraph
from models.ontology import DataProperty, ObjectProperty, Ontology
from models.pattern import PatternGraph
from models.semantic_model import SemanticModel
from models.source import SourceDescription, SourceTable

# ---------------------------------------------------------------------- CB worked example

E22 = "E22_Man-Made_Object"
E35 = "E35_Title"
E54 = "E54_Dimension"
E12 = "E12_Production"
E21 = "E21_Person"
E52 = "E52_Time-Span"
E67 = "E67_Birth"
E69 = "E69_Death"
E55 = "E55_Type"
E57 = "E57_Material"

P4 = "P4_has_time-span"
LABEL = "rdfs:label"

PRODUCTION_YEARS = ["1860", "1863", "1866", "1870", "1875"]
BIRTH_YEARS = ["1800", "1812", "1825", "1838", "1850"]
DEATH_YEARS = ["1880", "1892", "1905", "1918", "1930"]


def cb_ontology_object() -> Ontology:
    object_properties = [
        ObjectProperty("P102_has_title", E22, E35),
        ObjectProperty("P43_has_dimension", E22, E54),
        ObjectProperty("P108i_was_produced_by", E22, E12),
        ObjectProperty("P14_carried_out_by", E12, E21),
        ObjectProperty(P4, E12, E52),
        ObjectProperty(P4, E67, E52),
        ObjectProperty(P4, E69, E52),
        ObjectProperty("P98i_was_born", E21, E67),
        ObjectProperty("P100i_died_in", E21, E69),
        ObjectProperty("P32_used_general_technique", E12, E55),
        ObjectProperty("P45_consists_of", E22, E57),
        ObjectProperty("P130i_features_are_also_found_on", E22, E57),
    ]
    data_properties = [
        DataProperty(LABEL, E35),
        DataProperty(LABEL, E21),
        DataProperty(LABEL, E55),
        DataProperty(LABEL, E57),
        DataProperty("P90_has_value", E54),
        DataProperty("P82_at_some_time_within", E52),
        DataProperty("P82a_begin_of_the_begin", E52),
        DataProperty("P82b_end_of_the_end", E52),
    ]
    classes = {E22, E35, E54, E12, E21, E52, E67, E69, E55, E57}
    return Ontology(frozenset(classes), frozenset(object_properties), frozenset(data_properties)).validate()


GOLD_EDGES = [
    ("E22_Man-Made_Object1", "P102_has_title", "E35_Title1"),
    ("E22_Man-Made_Object1", "P43_has_dimension", "E54_Dimension1"),
    ("E22_Man-Made_Object1", "P108i_was_produced_by", "E12_Production1"),
    ("E12_Production1", "P14_carried_out_by", "E21_Person1"),
    ("E12_Production1", P4, "E52_Time-Span1"),
    ("E21_Person1", "P98i_was_born", "E67_Birth1"),
    ("E67_Birth1", P4, "E52_Time-Span2"),
    ("E21_Person1", "P100i_died_in", "E69_Death1"),
    ("E69_Death1", P4, "E52_Time-Span3"),
    ("E12_Production1", "P32_used_general_technique", "E55_Type1"),
]
GOLD_ATTRIBUTES = [
    ("E35_Title1", LABEL, "Title"),
    ("E54_Dimension1", "P90_has_value", "Dimensions"),
    ("E21_Person1", LABEL, "Artist"),
    ("E52_Time-Span1", "P82_at_some_time_within", "Date"),
    ("E52_Time-Span2", "P82a_begin_of_the_begin", "Begin Date"),
    ("E52_Time-Span3", "P82b_end_of_the_end", "Death Date"),
    ("E55_Type1", LABEL, "Medium"),
]

# Steiner seed: both extra time-spans hang off the production, Medium sits on a material
SEED_EDGES = [
    ("E22_Man-Made_Object1", "P102_has_title", "E35_Title1"),
    ("E22_Man-Made_Object1", "P43_has_dimension", "E54_Dimension1"),
    ("E22_Man-Made_Object1", "P108i_was_produced_by", "E12_Production1"),
    ("E12_Production1", "P14_carried_out_by", "E21_Person1"),
    ("E12_Production1", P4, "E52_Time-Span1"),
    ("E12_Production1", P4, "E52_Time-Span2"),
    ("E12_Production1", P4, "E52_Time-Span3"),
    ("E22_Man-Made_Object1", "P130i_features_are_also_found_on", "E57_Material1"),
]
SEED_ATTRIBUTES = GOLD_ATTRIBUTES[:-1] + [("E57_Material1", LABEL, "Medium")]


def cb_gold_model() -> SemanticModel:
    return SemanticModel.build(GOLD_EDGES, GOLD_ATTRIBUTES)


def cb_seed_model() -> SemanticModel:
    return SemanticModel.build(SEED_EDGES, SEED_ATTRIBUTES)


def cb_source_table() -> SourceTable:
    return SourceTable.from_mapping("CB", {
        "Title": ["Evening Bells", "The Mill Pond", "Girl Reading", "Orchard in Bloom", "Quiet Street"],
        "Dimensions": ["73 x 92 cm", "54 x 65 cm", "41 x 33 cm", "65 x 81 cm", "46 x 55 cm"],
        "Artist": ["Claude Monet", "Alfred Sisley", "Edgar Degas", "Claude Monet", "Mary Cassatt"],
        "Date": list(reversed(PRODUCTION_YEARS)),
        "Begin Date": list(reversed(BIRTH_YEARS)),
        "Death Date": list(reversed(DEATH_YEARS)),
        "Medium": ["Oil on canvas", "Oil on canvas", "Pastel", "Oil on panel", "Watercolor"],
    })


def npg_description() -> SourceDescription:
    table = SourceTable.from_mapping("NPG", {
        "Title": ["Flowers in a Vase", "The Harbor at Night", "Portrait of a Lady", "Winter Landscape", "Still Life"],
        "Dimensions": ["60 x 50 cm", "38 x 46 cm", "81 x 65 cm", "50 x 61 cm", "33 x 41 cm"],
        "Artist": ["Claude Monet", "Edgar Degas", "Mary Cassatt", "Claude Monet", "Edgar Degas"],
        "Date": PRODUCTION_YEARS,
        "Begin Date": BIRTH_YEARS,
        "Death Date": DEATH_YEARS,
        "Medium": ["Oil on canvas", "Pastel", "Oil on canvas", "Tempera", "Oil on panel"],
    })
    return SourceDescription(table, cb_gold_model())


def gt_description() -> SourceDescription:
    model = SemanticModel.build(
        [
            ("E22_Man-Made_Object1", "P102_has_title", "E35_Title1"),
            ("E22_Man-Made_Object1", "P45_consists_of", "E57_Material1"),
        ],
        [("E35_Title1", LABEL, "Title"), ("E57_Material1", LABEL, "Material")],
    )
    table = SourceTable.from_mapping("GT", {
        "Title": ["Bronze Horse", "Marble Bust", "Silver Cup", "Oak Chest"],
        "Material": ["bronze", "marble", "silver", "oak"],
    })
    return SourceDescription(table, model)


def medium_candidates() -> CandidateTypeSet:
    return CandidateTypeSet.of(
        "Medium",
        (E57, LABEL, 0.55),
        (E55, LABEL, 0.38),
        ("E41_Appellation", LABEL, 0.04),
        ("E33_Linguistic_Object", LABEL, 0.03),
    )


def cb_candidates() -> List[CandidateTypeSet]:
    gold = cb_gold_model()
    cands = [
        CandidateTypeSet.of(a, (*gold.semantic_type_of(a), 0.9))
        for a in gold.attributes() if a != "Medium"
    ]
    return cands + [medium_candidates()]


@pytest.fixture
def cb_ontology() -> Ontology:
    return cb_ontology_object()


@pytest.fixture
def cb_gold() -> SemanticModel:
    return cb_gold_model()


@pytest.fixture
def cb_seed() -> SemanticModel:
    return cb_seed_model()


@pytest.fixture
def cb_source() -> SourceTable:
    return cb_source_table()


@pytest.fixture
def cb_known() -> List[SourceDescription]:
    return [npg_description(), gt_description()]


@pytest.fixture
def cb_kg(cb_known) -> KnowledgeGraph:
    kg = KnowledgeGraph({})
    for description in cb_known:
        kg = kg.union(KnowledgeGraph.materialize(description))
    return kg


@pytest.fixture
def cb_candidates_fixture() -> List[CandidateTypeSet]:
    return cb_candidates()


@pytest.fixture
def cb_constraint_entries() -> Dict[str, int]:
    return {E52: 3, E35: 1}


# ---------------------------------------------------------------------- toy knowledge graphs


@pytest.fixture
def chain_kg() -> KnowledgeGraph:
    """A -p-> B -q-> C chains; b2 has two A parents; a1 also reaches a D, c1 another D."""
    entities = {"a1": "A", "a2": "A", "a3": "A", "b1": "B", "b2": "B", "c1": "C", "c2": "C", "d1": "D"}
    relations = [
        ("a1", "p", "b1"), ("a2", "p", "b2"), ("a3", "p", "b2"),
        ("b1", "q", "c1"), ("b2", "q", "c2"),
        ("a1", "r", "d1"), ("c1", "s", "d1"),
    ]
    return KnowledgeGraph(entities, relations)


def random_kg(rng: random.Random, n_entities: int, n_relations: int,
              classes: Sequence[str] = ("A", "B", "C"), props: Sequence[str] = ("p", "q")) -> KnowledgeGraph:
    entities = {f"e{i}": rng.choice(classes) for i in range(n_entities)}
    names = sorted(entities)
    relations = []
    for _ in range(n_relations):
        s, o = rng.sample(names, 2)
        relations.append((s, rng.choice(props), o))
    return KnowledgeGraph(entities, relations)


def random_pattern(rng: random.Random, n_nodes: int, extra_edges: int = 1,
                   classes: Sequence[str] = ("A", "B", "C"), props: Sequence[str] = ("p", "q")) -> PatternGraph:
    """Connected random pattern: a random tree plus a few extra edges."""
    nodes = [(f"n{i}", rng.choice(classes)) for i in range(n_nodes)]
    edges = []
    for i in range(1, n_nodes):
        j = rng.randrange(i)
        a, b = (f"n{i}", f"n{j}") if rng.random() < 0.5 else (f"n{j}", f"n{i}")
        edges.append((a, rng.choice(props), b))
    for _ in range(extra_edges if n_nodes > 1 else 0):
        a, b = rng.sample([n for n, _ in nodes], 2)
        edges.append((a, rng.choice(props), b))
    return PatternGraph(tuple(nodes), tuple(edges))


@pytest.fixture
def make_random_kg():
    return random_kg


@pytest.fixture
def make_random_pattern():
    return random_pattern


# ---------------------------------------------------------------------- brute-force oracles


def brute_force_embeddings(pattern: PatternGraph, kg: KnowledgeGraph) -> List[Dict[str, str]]:
    """Every injective, class-preserving map under which each pattern triple is a KG triple."""
    relations = set(kg.relations)
    nodes = pattern.node_ids
    pools = [sorted(e for e, cls in kg.entities.items() if cls == pattern.label(n)) for n in nodes]
    found = []
    for image in product(*pools):
        if len(set(image)) != len(image):
            continue
        mapping = dict(zip(nodes, image))
        if all((mapping[s], p, mapping[d]) in relations for s, p, d in pattern.edges):
            found.append(mapping)
    return found


def brute_force_min_image(pattern: PatternGraph, kg: KnowledgeGraph) -> int:
    embeddings = brute_force_embeddings(pattern, kg)
    if not embeddings or not pattern.is_connected():
        return 0
    return min(len({e[n] for e in embeddings}) for n in pattern.node_ids)


def brute_force_mcs_size(pattern: PatternGraph, kg: KnowledgeGraph) -> Tuple[int, int]:
    """(nodes, edges) of the largest connected sub-pattern with an embedding."""
    best = (0, 0)
    for size in range(len(pattern), 0, -1):
        for subset in combinations(pattern.node_ids, size):
            induced = pattern.subgraph(subset)
            edges = list(induced.edges)
            for count in range(len(edges), size - 2, -1):
                for chosen in combinations(edges, count):
                    candidate = induced.subgraph(subset, chosen)
                    if candidate.is_connected() and brute_force_embeddings(candidate, kg):
                        best = max(best, (size, count))
        if best[0] == size:
            return best
    return best


def brute_force_code(pattern: PatternGraph) -> tuple:
    """Smallest (labels, edges) encoding over every node order."""
    best = None
    for order in permutations(pattern.node_ids):
        position = {n: i for i, n in enumerate(order)}
        code = (
            tuple(pattern.label(n) for n in order),
            tuple(sorted((position[s], p, position[d]) for s, p, d in pattern.edges)),
        )
        if best is None or code < best:
            best = code
    return best


@dataclass(frozen=True)
class OracleCompletion:
    frequency: int
    edges: int
    minimal: bool


def completion_key(model: SemanticModel, new_columns: Set[str] = frozenset()) -> tuple:
    """Encoding of the class structure, each node marked with the properties its old columns use."""
    used: Dict[str, List[str]] = {}
    for edge in model.data_edges():
        if model.node(edge.dst).attribute not in new_columns:
            used.setdefault(edge.src, []).append(edge.label)
    nodes = tuple((n.id, "|".join([n.label] + sorted(used.get(n.id, [])))) for n in model.class_nodes)
    edges = tuple((e.src, e.label, e.dst) for e in model.object_edges())
    return brute_force_code(PatternGraph(nodes, edges))


def _slots_free(nodes: Dict[str, str], used: Set[Tuple[str, str]], new_types) -> bool:
    """Some assignment puts every new type on its own unused (node, property) slot."""
    pools = [
        [(n, t.property) for n, label in sorted(nodes.items()) if label == t.class_name and (n, t.property) not in used]
        for _, t in new_types
    ]
    return any(len(set(choice)) == len(choice) for choice in product(*pools))


def _is_connected(nodes: Dict[str, str], edges) -> bool:
    if not nodes:
        return False
    reached = {next(iter(sorted(nodes)))}
    changed = True
    while changed:
        changed = False
        for s, _, d in edges:
            if (s in reached) != (d in reached):
                reached |= {s, d}
                changed = True
    return reached == set(nodes)


def brute_force_completions(sd: SemanticModel, kg: KnowledgeGraph, new_types, caps: Dict[str, int],
                            max_edges: int = 7) -> Dict[tuple, OracleCompletion]:
    """Every connected supergraph of sd (at most `max_edges` object edges) that embeds in kg,
    stays within the caps and leaves a free slot for each new type, keyed by completion_key.

    Supergraphs may add fresh nodes or edges between present nodes. A completion is
    minimal when dropping any one added edge (and a fresh node it leaves alone)
    no longer completes sd.
    """
    triples = sorted({(kg.entities[s], p, kg.entities[o]) for s, p, o in kg.relations})
    used = {(e.src, e.label) for e in sd.data_edges()}
    old_columns = {n.attribute for n in sd.data_nodes}
    seed_nodes = {n.id: n.label for n in sd.class_nodes}
    seed_edges = {(e.src, e.label, e.dst) for e in sd.object_edges()}

    def within_caps(nodes):
        counts: Dict[str, int] = {}
        for label in nodes.values():
            counts[label] = counts.get(label, 0) + 1
        return all(count <= caps.get(label, count) for label, count in counts.items())

    def key(nodes, edges):
        marks = {n: "|".join([label] + sorted(p for m, p in used if m == n)) for n, label in nodes.items()}
        return brute_force_code(PatternGraph(tuple(marks.items()), tuple(edges)))

    def frequency(nodes, edges):
        return brute_force_min_image(PatternGraph(tuple(nodes.items()), tuple(edges)), kg)

    def covers(nodes, edges):
        return within_caps(nodes) and _slots_free(nodes, used, new_types)

    def minimal(nodes, edges):
        for edge in edges - seed_edges:
            rest = edges - {edge}
            kept = dict(nodes)
            for end in (edge[0], edge[2]):
                if end not in seed_nodes and not any(end in (s, d) for s, _, d in rest):
                    kept.pop(end)
            if _is_connected(kept, rest) and covers(kept, rest):
                return False
        return True

    result: Dict[tuple, OracleCompletion] = {}
    start = (dict(seed_nodes), frozenset(seed_edges))
    if not _is_connected(*start) or frequency(*start) < 1:
        return result
    frontier = {key(*start): start}
    seen = set(frontier)
    while frontier:
        next_frontier = {}
        for code, (nodes, edges) in frontier.items():
            if covers(nodes, edges):
                result[code] = OracleCompletion(frequency(nodes, edges), len(edges), minimal(nodes, edges))
            if len(edges) >= max_edges:
                continue
            fresh = f"new{len(nodes)}"
            grown = []
            for s, p, o in triples:
                for node_id, label in nodes.items():
                    if label == s:
                        grown.append((dict(nodes, **{fresh: o}), edges | {(node_id, p, fresh)}))
                    if label == o:
                        grown.append((dict(nodes, **{fresh: s}), edges | {(fresh, p, node_id)}))
                    for other, other_label in nodes.items():
                        if label == s and other_label == o and other != node_id:
                            grown.append((nodes, edges | {(node_id, p, other)}))
            for g_nodes, g_edges in grown:
                if len(g_edges) == len(edges) or not within_caps(g_nodes):
                    continue
                g_code = key(g_nodes, g_edges)
                if g_code in seen:
                    continue
                seen.add(g_code)
                if frequency(g_nodes, g_edges) >= 1:
                    next_frontier[g_code] = (g_nodes, g_edges)
        frontier = next_frontier
    return result


@pytest.fixture
def oracle_embeddings():
    return brute_force_embeddings


@pytest.fixture
def oracle_min_image():
    return brute_force_min_image


@pytest.fixture
def oracle_mcs_size():
    return brute_force_mcs_size


@pytest.fixture
def oracle_completions():
    return brute_force_completions


@pytest.fixture
def oracle_code():
    return brute_force_code
