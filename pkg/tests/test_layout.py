import json
import math
import warnings

import numpy as np
import pytest

from blobvid.blobs import FrameGeometry
from blobvid.errors import EmptyPrompt, ParseError, RangeError, SchemaError
from blobvid.exemplars import (
    EXEMPLAR_1_LAYOUT,
    EXEMPLAR_1_PROMPT,
    EXEMPLAR_2_LAYOUT,
    EXEMPLAR_2_PROMPT,
    INSTRUCTION,
)
from blobvid.layout import (
    FileReplayProvider,
    HTTPChatProvider,
    build_icl_prompt,
    default_prompt_bundle,
    densify_layout,
    parse_layout,
    serialize_layout,
    serialize_layout_doc,
)
from blobvid.video import video_to_json

GEOM = FrameGeometry(720, 480)

SIMPLE = json.dumps({
    "Frame0": {"Object1": {"blob": [100, 100, 40, 20, 0.5], "caption": "a dog"}},
    "Frame4": {"Object1": {"blob": [200, 150, 40, 20, -0.5]}},
})


class TestParseLayout:
    def test_plain_json(self):
        doc = parse_layout(SIMPLE)
        assert sorted(doc.frames) == [0, 4]
        assert doc.frames[0]["1"].blob == (100, 100, 40, 20, 0.5)
        assert doc.frames[0]["1"].caption == "a dog"
        assert doc.frames[4]["1"].caption is None

    def test_fenced_json(self):
        doc = parse_layout(f"```json\n{SIMPLE}\n```")
        assert sorted(doc.frames) == [0, 4]
        doc = parse_layout(f"```\n{SIMPLE}\n```\n")
        assert sorted(doc.frames) == [0, 4]

    def test_parse_error_carries_byte_offset(self):
        text = '{"Frame0": }'
        with pytest.raises(ParseError) as exc:
            parse_layout(text)
        assert exc.value.byte_offset == text.index("}")

    def test_byte_offset_counts_utf8_bytes(self):
        # Two-byte character before the syntax error shifts the byte offset
        # past the character offset.
        text = '{"Frame0": {"Objecté": }}'
        with pytest.raises(ParseError) as exc:
            parse_layout(text)
        assert exc.value.byte_offset == len(text[: text.index("}")].encode("utf-8"))

    def test_rejects_non_object_top(self):
        with pytest.raises(SchemaError):
            parse_layout("[1, 2]")

    def test_rejects_unknown_top_key(self):
        with pytest.raises(SchemaError, match="Background"):
            parse_layout('{"Background": {}}')

    def test_rejects_non_increasing_frames(self):
        doc = {"Frame4": {}, "Frame0": {}}
        with pytest.raises(SchemaError, match="increasing"):
            parse_layout(json.dumps(doc))

    def test_rejects_bad_object_key(self):
        with pytest.raises(SchemaError, match="Frame0"):
            parse_layout('{"Frame0": {"Thing1": {"blob": [1, 1, 1, 1, 0]}}}')

    def test_rejects_unknown_entry_key(self):
        with pytest.raises(SchemaError, match="color"):
            parse_layout('{"Frame0": {"Object1": {"blob": [1, 1, 1, 1, 0], "color": "red"}}}')

    def test_rejects_missing_blob(self):
        with pytest.raises(SchemaError, match="blob"):
            parse_layout('{"Frame0": {"Object1": {"caption": "x"}}}')

    def test_rejects_malformed_blob(self):
        for bad in ('[1, 2, 3]', '[1, 2, 3, 4, true]', '"wide"', '[1, 2, 3, 4, "x"]'):
            with pytest.raises(SchemaError):
                parse_layout('{"Frame0": {"Object1": {"blob": %s}}}' % bad)

    def test_rejects_nan_blob(self):
        with pytest.raises(SchemaError):
            parse_layout('{"Frame0": {"Object1": {"blob": [1, 2, 3, 4, NaN]}}}')

    def test_rejects_bad_caption_type(self):
        with pytest.raises(SchemaError, match="caption"):
            parse_layout('{"Frame0": {"Object1": {"blob": [1, 1, 1, 1, 0], "caption": 7}}}')

    def test_object_ids_first_appearance_order(self):
        doc = parse_layout(json.dumps({
            "Frame0": {"Object3": {"blob": [1, 1, 1, 1, 0]}},
            "Frame2": {"Object1": {"blob": [2, 2, 1, 1, 0]},
                       "Object3": {"blob": [1, 1, 1, 1, 0]}},
        }))
        assert doc.object_ids() == ["3", "1"]

    def test_caption_whitespace_verbatim(self):
        doc = parse_layout('{"Frame0": {"Object1": {"blob": [1, 1, 1, 1, 0], "caption": " padded "}}}')
        assert doc.frames[0]["1"].caption == " padded "


class TestExemplars:
    def test_both_parse(self):
        d1 = parse_layout(EXEMPLAR_1_LAYOUT)
        d2 = parse_layout(EXEMPLAR_2_LAYOUT)
        assert sorted(d1.frames) == [0, 2, 12]
        assert sorted(d2.frames) == [0, 12]
        assert d2.object_ids() == ["2", "3", "4"]

    def test_printed_params_read_back(self):
        d1 = parse_layout(EXEMPLAR_1_LAYOUT)
        assert d1.frames[0]["2"].blob == (443, 252, 102, 72, -2.353)
        d2 = parse_layout(EXEMPLAR_2_LAYOUT)
        assert d2.frames[12]["4"].blob == (670, 242, 151, 64, 1.598)

    def test_caption_spacing_quirks_kept(self):
        d1 = parse_layout(EXEMPLAR_1_LAYOUT)
        cap0 = d1.frames[0]["2"].caption
        cap2 = d1.frames[2]["2"].caption
        assert cap0.endswith(" ")
        assert cap2.startswith(" ")
        assert "bird's" in cap0

    def test_prompts_nonempty(self):
        assert EXEMPLAR_1_PROMPT and EXEMPLAR_2_PROMPT
        assert "[cx, cy, a, b, theta]" in INSTRUCTION


class TestDensifyLayout:
    def test_basic(self):
        v = densify_layout(parse_layout(SIMPLE), num_frames=5, geom=GEOM)
        assert v.num_frames == 5
        assert v.num_tracks == 1
        assert v.tracks[0].object_id == 1
        assert v.is_dense()
        # Midpoint of the two anchors.
        assert v.tracks[0].params[2].cx == pytest.approx(150.0)

    def test_anchor_interval_from_min_gap(self):
        v = densify_layout(parse_layout(EXEMPLAR_1_LAYOUT), num_frames=13, geom=GEOM)
        assert v.anchor_interval == 2

    def test_theta_canonicalized_in_video(self):
        v = densify_layout(parse_layout(EXEMPLAR_1_LAYOUT), num_frames=13, geom=GEOM)
        p = v.tracks[0].params[0]
        assert p.is_canonical()
        assert p.theta == pytest.approx(-2.353 + math.pi)

    def test_nonnumeric_ids_enumerate(self):
        doc = parse_layout(json.dumps({
            "Frame0": {"Objectcat": {"blob": [1, 1, 1, 1, 0]},
                       "Objectdog": {"blob": [2, 2, 1, 1, 0]}},
        }))
        v = densify_layout(doc, num_frames=1, geom=GEOM)
        assert [t.object_id for t in v.tracks] == [0, 1]

    def test_out_of_frame_center_clamped_with_warning(self):
        doc = parse_layout('{"Frame0": {"Object1": {"blob": [900, 100, 40, 20, 0.0]}}}')
        with pytest.warns(UserWarning, match="cx"):
            v = densify_layout(doc, num_frames=1, geom=GEOM)
        assert v.tracks[0].params[0].cx == 720.0

    def test_too_few_frames(self):
        with pytest.raises(RangeError):
            densify_layout(parse_layout(SIMPLE), num_frames=3, geom=GEOM)

    def test_empty_doc(self):
        with pytest.raises(SchemaError):
            densify_layout(parse_layout("{}"), num_frames=4, geom=GEOM)

    def test_object_missing_from_middle_frame(self):
        doc = parse_layout(json.dumps({
            "Frame0": {"Object1": {"blob": [10, 10, 4, 2, 0]},
                       "Object2": {"blob": [50, 50, 4, 2, 0]}},
            "Frame2": {"Object1": {"blob": [20, 10, 4, 2, 0]}},
            "Frame4": {"Object1": {"blob": [30, 10, 4, 2, 0]},
                       "Object2": {"blob": [70, 50, 4, 2, 0]}},
        }))
        v = densify_layout(doc, num_frames=5, geom=GEOM)
        tr2 = next(t for t in v.tracks if t.object_id == 2)
        # Missing middle annotation interpolates across the whole gap.
        assert tr2.params[2].cx == pytest.approx(60.0)


class TestSerializeLayout:
    def test_roundtrip_params_bitwise(self):
        v = densify_layout(parse_layout(SIMPLE), num_frames=5, geom=GEOM)
        text = serialize_layout(v)
        doc = parse_layout(text)
        for t in range(5):
            got = doc.frames[t]["1"].blob
            p = v.tracks[0].params[t]
            assert got == (p.cx, p.cy, p.a, p.b, p.theta)

    def test_stride(self):
        v = densify_layout(parse_layout(SIMPLE), num_frames=5, geom=GEOM)
        doc = parse_layout(serialize_layout(v, frame_stride=2))
        assert sorted(doc.frames) == [0, 2, 4]

    def test_captions_only_where_present(self):
        v = densify_layout(parse_layout(SIMPLE), num_frames=5, geom=GEOM)
        doc = parse_layout(serialize_layout(v))
        assert doc.frames[0]["1"].caption == "a dog"
        assert doc.frames[1]["1"].caption is None

    def test_empty_video(self):
        from blobvid.video import BlobVideo

        assert serialize_layout(BlobVideo(2, GEOM, 8, ())) == "{}"

    def test_requires_dense(self):
        from blobvid.blobs import BlobParams
        from blobvid.video import BlobTrack, BlobVideo

        v = BlobVideo(4, GEOM, 8, (BlobTrack(0, {0: BlobParams(1, 1, 2, 1, 0)}, {}),))
        with pytest.raises(SchemaError):
            serialize_layout(v)

    def test_bad_stride(self):
        from blobvid.video import BlobVideo

        with pytest.raises(RangeError):
            serialize_layout(BlobVideo(2, GEOM, 8, ()), frame_stride=0)

    def test_doc_serializer_stable(self):
        once = serialize_layout_doc(parse_layout(EXEMPLAR_2_LAYOUT))
        twice = serialize_layout_doc(parse_layout(once))
        assert once == twice


class TestPromptAssembly:
    def test_structure(self):
        prompt = build_icl_prompt("two cats boxing")
        assert prompt.startswith(INSTRUCTION)
        assert prompt.count("Example 1:") == 1
        assert prompt.count("Example 2:") == 1
        assert prompt.count("```json") == 2
        assert prompt.rstrip().endswith("Prompt: two cats boxing")
        assert prompt.index(EXEMPLAR_1_PROMPT) < prompt.index(EXEMPLAR_2_PROMPT)

    def test_exemplar_layouts_embedded_verbatim(self):
        prompt = build_icl_prompt("x")
        assert EXEMPLAR_1_LAYOUT in prompt
        assert EXEMPLAR_2_LAYOUT in prompt

    def test_empty_prompt_rejected(self):
        with pytest.raises(EmptyPrompt):
            build_icl_prompt("")

    def test_default_bundle(self):
        bundle = default_prompt_bundle()
        assert len(bundle.exemplars) == 2
        assert bundle.instruction == INSTRUCTION


class TestProviders:
    def test_file_replay(self, tmp_path):
        (tmp_path / "resp.txt").write_text(SIMPLE, encoding="utf-8")
        provider = FileReplayProvider(str(tmp_path / "resp.txt"))
        assert parse_layout(provider.generate("ignored")).max_frame() == 4

    def test_http_provider_parses_chat_response(self, monkeypatch):
        calls = {}

        class FakeResponse:
            def raise_for_status(self):
                pass

            def json(self):
                return {"choices": [{"message": {"content": "```json\n{}\n```"}}]}

        def fake_post(url, json=None, headers=None, timeout=None):
            calls["url"] = url
            calls["payload"] = json
            calls["headers"] = headers
            calls["timeout"] = timeout
            return FakeResponse()

        import requests

        monkeypatch.setattr(requests, "post", fake_post)
        monkeypatch.setenv("BLOBVID_API_TOKEN", "sekrit")
        provider = HTTPChatProvider("https://example.invalid/v1/chat", model="m-1")
        out = provider.generate("make a layout")
        assert out == "```json\n{}\n```"
        assert calls["url"] == "https://example.invalid/v1/chat"
        assert calls["payload"]["model"] == "m-1"
        assert calls["payload"]["messages"][0]["content"] == "make a layout"
        assert calls["headers"]["Authorization"] == "Bearer sekrit"
        assert calls["timeout"] == 60.0

    def test_http_provider_text_fallback(self, monkeypatch):
        class FakeResponse:
            def raise_for_status(self):
                pass

            def json(self):
                return {"choices": [{"text": "{}"}]}

        import requests

        monkeypatch.setattr(requests, "post", lambda *a, **k: FakeResponse())
        provider = HTTPChatProvider("https://example.invalid", model="m")
        assert provider.generate("p") == "{}"
