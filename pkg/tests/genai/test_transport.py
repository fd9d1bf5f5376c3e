import json

import pytest
import requests

from riscv_supplychain.exceptions import EndpointError
from riscv_supplychain.genai.transport import (
    REDACTED,
    EndpointConfig,
    OfflineTransport,
    OpenAIChatTransport,
    ReplayTransport,
    Transcript,
    image_content,
)

MESSAGES = [
    {"role": "system", "content": "s"},
    {"role": "user", "content": "u"},
]


@pytest.fixture()
def endpoint():
    return EndpointConfig(
        base_url="http://localhost:8000/v1/",
        api_key="sk-secret",
        model_name="m",
        timeout=5,
    )


@pytest.fixture()
def session(mocker):
    return mocker.Mock()


def answer(mocker, session, ok=True, status=200, body=None, text=""):
    response = mocker.Mock(ok=ok, status_code=status, text=text)
    if isinstance(body, Exception):
        response.json.side_effect = body
    else:
        response.json.return_value = body
    session.post.return_value = response
    return response


def test_endpoint_config_validation():
    with pytest.raises(ValueError):
        EndpointConfig(base_url="")
    with pytest.raises(ValueError):
        EndpointConfig(base_url="http://x", max_retries=-1)
    assert "sk-secret" not in repr(
        EndpointConfig(base_url="http://x", api_key="sk-secret")
    )


def test_openai_transport_posts_chat_request(mocker, endpoint, session):
    answer(
        mocker,
        session,
        body={"choices": [{"message": {"content": "@startuml"}}]},
    )
    transport = OpenAIChatTransport(endpoint, session=session)
    assert transport.complete(MESSAGES) == "@startuml"
    session.post.assert_called_once_with(
        "http://localhost:8000/v1/chat/completions",
        json={"model": "m", "messages": MESSAGES, "temperature": 0.0},
        headers={
            "Content-Type": "application/json",
            "Authorization": "Bearer sk-secret",
        },
        timeout=5,
    )
    assert transport.max_retries == 3


def test_openai_transport_joins_content_parts(mocker, endpoint, session):
    parts = [{"type": "text", "text": "a"}, {"type": "text", "text": "b"}]
    body = {"choices": [{"message": {"content": parts}}]}
    answer(mocker, session, body=body)
    assert OpenAIChatTransport(endpoint, session).complete(MESSAGES) == "ab"


def test_openai_transport_error_status(mocker, endpoint, session):
    answer(mocker, session, ok=False, status=503, text="overloaded")
    with pytest.raises(EndpointError, match="503: overloaded"):
        OpenAIChatTransport(endpoint, session).complete(MESSAGES)


def test_openai_transport_unreachable(endpoint, session):
    session.post.side_effect = requests.exceptions.ConnectionError("refused")
    with pytest.raises(EndpointError, match="Could not reach"):
        OpenAIChatTransport(endpoint, session).complete(MESSAGES)


@pytest.mark.parametrize("body", [ValueError("not json"), {"choices": []}])
def test_openai_transport_bad_body(mocker, endpoint, session, body):
    answer(mocker, session, body=body)
    with pytest.raises(EndpointError, match="Unexpected"):
        OpenAIChatTransport(endpoint, session).complete(MESSAGES)


def test_replay_transport():
    transport = ReplayTransport(["first", "second"], max_retries=1)
    assert transport.complete(MESSAGES) == "first"
    assert transport.complete(MESSAGES[:1]) == "second"
    assert transport.calls == [MESSAGES, MESSAGES[:1]]
    with pytest.raises(EndpointError, match="exhausted"):
        transport.complete(MESSAGES)


def test_replay_from_files(tmp_path):
    paths = []
    for index, text in enumerate(["one", "two"]):
        path = tmp_path / f"answer{index}.txt"
        path.write_text(text, encoding="utf-8")
        paths.append(path)
    assert ReplayTransport.from_files(paths).responses == ["one", "two"]


def test_offline_transport():
    with pytest.raises(EndpointError):
        OfflineTransport().complete(MESSAGES)


def test_image_content(tmp_path):
    path = tmp_path / "flow.png"
    path.write_bytes(b"\x89PNG")
    part = image_content(path)
    assert part["type"] == "image_url"
    assert part["image_url"]["url"] == "data:image/png;base64,iVBORw=="


def test_transcript_redacts_secrets(tmp_path):
    transcript = Transcript(secrets=["sk-secret", ""])
    request = [{"role": "user", "content": "key sk-secret"}]
    entry = transcript.record(0, request, "sk-secret back", "ok", 0.0)
    assert entry.request == [{"role": "user", "content": f"key {REDACTED}"}]
    assert entry.response == f"{REDACTED} back"
    assert request[0]["content"] == "key sk-secret"

    transcript.record(1, request, "done", "ok", 0.0)
    path = tmp_path / "logs" / "transcripts.jsonl"
    transcript.write(path)
    transcript.write(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 4
    assert "sk-secret" not in path.read_text(encoding="utf-8")
    assert [json.loads(line)["attempt"] for line in lines] == [0, 1, 0, 1]
    assert len(transcript) == 2
