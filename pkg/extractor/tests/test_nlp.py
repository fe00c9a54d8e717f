"""Caption annotation heuristics."""

import pytest

from oocextract.errors import ModelLoadError
from oocextract.nlp import (
    GazetteerNer,
    GenericCaptionClassifier,
    flag_caption_roles,
    person_roles_excluded,
)


@pytest.fixture(scope="module")
def ner():
    return GazetteerNer()


@pytest.fixture(scope="module")
def stub_classifier():
    return GenericCaptionClassifier("none")


class TestNer:
    def test_canonical_caption(self, ner):
        mentions = ner("Angela Merkel met Barack Obama in Berlin")
        assert len(mentions) >= 3
        labels = [m.label for m in mentions[:3]]
        assert labels == ["PERSON", "PERSON", "GPE"]
        assert mentions[0].surface == "Angela Merkel"
        assert mentions[0].linked_id == "Angela_Merkel"

    def test_possessive_surface_resolves(self, ner):
        mentions = ner("The cabinet discussed Merkel's proposal at length")
        persons = [m for m in mentions if m.label == "PERSON"]
        assert persons and persons[0].surface == "Merkel"

    def test_multiword_org(self, ner):
        mentions = ner("Delegates from the European Union arrived early")
        assert any(m.label == "ORG" and m.surface == "European Union" for m in mentions)

    def test_capitalized_fallback(self, ner):
        mentions = ner("Protesters filled Grand Plaza before the speech")
        assert any(m.surface == "Grand Plaza" and m.label == "OTHER" for m in mentions)

    def test_custom_gazetteer(self, tmp_path):
        path = tmp_path / "gaz.json"
        path.write_text('{"examplestan": ["GPE", "Examplestan"]}')
        custom = GazetteerNer(path)
        mentions = custom("Officials travelled to Examplestan for talks")
        assert any(m.label == "GPE" and m.linked_id == "Examplestan" for m in mentions)

    def test_bad_gazetteer_label(self, tmp_path):
        path = tmp_path / "gaz.json"
        path.write_text('{"x": ["NOPE", null]}')
        with pytest.raises(ModelLoadError):
            GazetteerNer(path)


class TestRoleExclusion:
    def test_possessive_person_excluded(self, ner, stub_classifier):
        excluded, generic = flag_caption_roles(
            "Merkel's spokesman announced the decision on Tuesday", ner, stub_classifier
        )
        assert excluded is True
        assert generic is False

    def test_subject_person_not_excluded(self, ner, stub_classifier):
        excluded, _ = flag_caption_roles(
            "Angela Merkel speaks at the summit", ner, stub_classifier
        )
        assert excluded is False

    def test_object_person_excluded(self, ner):
        mentions = ner("Supporters greeted Barack Obama at the airport gates")
        assert person_roles_excluded(
            "Supporters greeted Barack Obama at the airport gates", mentions
        )

    def test_noun_modifier_excluded(self, ner):
        caption = "The Obama administration outlined a new budget framework"
        assert person_roles_excluded(caption, ner(caption))

    def test_mixed_roles_not_excluded(self, ner):
        # subject person plus possessive person: not every mention excluded
        caption = "Angela Merkel praised Obama's record during the debate"
        assert not person_roles_excluded(caption, ner(caption))

    def test_no_person_mentions_is_false(self, ner):
        caption = "Flood waters covered the streets of Berlin overnight"
        assert not person_roles_excluded(caption, ner(caption))


class TestGenericClassifier:
    def test_stub_always_false(self):
        classifier = GenericCaptionClassifier("none")
        assert classifier("Hillary Clinton is seen at a gala") is False

    def test_keyword_classifier_fires_on_cues(self):
        classifier = GenericCaptionClassifier("keyword")
        assert classifier("Hillary Clinton is seen at a gala") is True
        assert classifier("Hillary Clinton unveiled the new bridge") is False

    def test_unknown_kind_rejected(self):
        with pytest.raises(ModelLoadError):
            GenericCaptionClassifier("bert-large")
