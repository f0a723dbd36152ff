import json

import pytest

from squad_connector.squad import (
    DatasetStats,
    SquadFormatError,
    Triplet,
    dataset_stats,
    parse_squad,
    read_squad,
    write_squad,
)
from squad_connector.tokenizer import tokenize


def write_json(path, document):
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def squad_document(qas):
    return {"data": [{"title": "t", "paragraphs": [{"context": "The cat sat on the mat.", "qas": qas}]}]}


def test_tokenizer_lowercases_and_splits_punctuation():
    assert tokenize("Where's Paris, France?") == ["where", "'", "s", "paris", ",", "france", "?"]
    assert tokenize("") == []


def test_triplet_tokens_are_derived():
    t = Triplet("Who sat?", "The cat sat.", "The cat")
    assert t.question_tokens == ("who", "sat", "?")
    assert t.answer_tokens == ("the", "cat")


def test_read_squad_takes_the_first_answer(tmp_path):
    path = write_json(tmp_path / "d.json", squad_document([
        {"id": "a", "question": "Who sat?", "answers": [{"text": "The cat"}, {"text": "cat"}]},
        {"id": "b", "question": "Where?", "answers": []},
    ]))
    data = read_squad(path)
    assert data.skipped == 1
    assert [t.answer for t in data.triplets] == ["The cat"]
    assert data.triplets[0].source_id == "a"


def test_fields_without_tokens_are_skipped_with_their_location(tmp_path, caplog):
    document = squad_document([
        {"id": "a", "question": "Who sat?", "answers": [{"text": "The cat"}]},
        {"id": "b", "question": "Who?", "answers": [{"text": "  "}]},
        {"id": "c", "question": " ", "answers": [{"text": "cat"}]},
        {"id": "d", "question": "Where?", "answers": []},
    ])
    document["data"][0]["paragraphs"].append(
        {"context": "\t", "qas": [{"id": "e", "question": "What?", "answers": [{"text": "mat"}]}]}
    )
    with caplog.at_level("WARNING", logger="squad_connector.squad"):
        data = read_squad(write_json(tmp_path / "d.json", document))
    assert [t.source_id for t in data.triplets] == ["a"]
    assert data.skipped == 4
    assert data.skipped_at == [
        "data[0].paragraphs[0].qas[1]",
        "data[0].paragraphs[0].qas[2]",
        "data[0].paragraphs[0].qas[3]",
        "data[0].paragraphs[1].qas[0]",
    ]
    assert "data[0].paragraphs[0].qas[1]: empty answer, question skipped" in caplog.messages
    assert "data[0].paragraphs[0].qas[2]: empty question, question skipped" in caplog.messages
    assert "data[0].paragraphs[1].qas[0]: empty context, question skipped" in caplog.messages
    assert all(t.context_tokens and t.question_tokens and t.answer_tokens for t in data.triplets)


def test_write_then_read_keeps_triplets(tmp_path):
    triplets = [Triplet("Who sat?", "The cat sat.", "cat", "q1"), Triplet("What?", "The cat sat.", "sat", "q2"),
                Triplet("Why?", "Other text.", "text", "q3")]
    path = tmp_path / "out.json"
    write_squad(triplets, path)
    assert read_squad(path).triplets == triplets == parse_squad(path)
    document = json.loads(path.read_text())
    assert len(document["data"][0]["paragraphs"]) == 2


@pytest.mark.parametrize(
    "document, message",
    [
        ({}, "<root>: missing 'data'"),
        ({"data": {}}, "<root>.data: expected list"),
        ({"data": [{"paragraphs": [{"qas": []}]}]}, "data[0].paragraphs[0]: missing 'context'"),
        (squad_document([{"question": "q", "answers": [{}]}]), "data[0].paragraphs[0].qas[0].answers[0]: missing 'text'"),
        (squad_document([{"question": 3, "answers": []}]), "data[0].paragraphs[0].qas[0].question: expected str"),
    ],
)
def test_structural_errors_name_their_location(tmp_path, document, message):
    with pytest.raises(SquadFormatError) as info:
        read_squad(write_json(tmp_path / "bad.json", document))
    assert str(info.value) == message


def test_invalid_json_raises(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(SquadFormatError, match="invalid JSON"):
        read_squad(path)


def test_dataset_stats_rows():
    stats = dataset_stats([Triplet("a b ?", "x y z w", "y"), Triplet("c ?", "x y", "x y z")])
    assert stats == DatasetStats(2, 3.0, 2.5, 2.0)
    assert stats.to_row("dev").split() == ["dev", "2", "3.0", "2.5", "2.0"]
    assert DatasetStats.header().split() == ["Dataset", "#", "n", "m", "k"]
    with pytest.raises(ValueError):
        dataset_stats([])
