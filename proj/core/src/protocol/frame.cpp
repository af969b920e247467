// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/protocol/frame.hpp"

#include <map>
#include <nlohmann/json.hpp>

#include "promptseg/error.hpp"

namespace promptseg::protocol {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& why) {
  throw Error(ErrorCode::MalformedFrame, "malformed frame: " + why);
}

json tensor_to_json(const TensorHeader& t) {
  return json{{"dtype", to_string(t.dtype)},
              {"shape", t.shape},
              {"checksum", t.checksum},
              {"shm_name", t.shm_name},
              {"byte_order", "little"}};
}

TensorHeader tensor_from_json(const json& j) {
  if (!j.is_object()) malformed("tensor header must be an object");
  TensorHeader t;
  const auto dt = parse_dtype(j.at("dtype").get<std::string>());
  if (!dt) malformed("unknown dtype");
  t.dtype = *dt;
  t.shape = j.at("shape").get<std::vector<std::uint64_t>>();
  t.checksum = j.at("checksum").get<std::uint32_t>();
  t.shm_name = j.at("shm_name").get<std::string>();
  if (j.value("byte_order", std::string("little")) != "little") {
    malformed("byte_order must be little");
  }
  return t;
}

template <typename T>
void put(json& body, const char* key, const std::optional<T>& v) {
  if (v) body[key] = *v;
}

template <typename T>
void take(const json& body, const char* key, std::optional<T>& out) {
  if (auto it = body.find(key); it != body.end()) out = it->template get<T>();
}

void require_number(const json& body, const char* key) {
  if (auto it = body.find(key); it != body.end() && !it->is_number()) {
    malformed(std::string(key) + " must be a number");
  }
}

}  // namespace

std::string encode_frame(const ControlMessage& m) {
  json body = json::object();
  put(body, "version", m.version);
  put(body, "model_id", m.model_id);
  put(body, "path", m.path);
  if (m.tensor) body["tensor"] = tensor_to_json(*m.tensor);
  if (m.output) body["output"] = tensor_to_json(*m.output);
  if (m.region) {
    body["region"] = json{{"x0", m.region->x0}, {"y0", m.region->y0},
                          {"w", m.region->w}, {"h", m.region->h}};
  }
  if (m.prompt) {
    json pts = json::array();
    for (const auto& p : m.prompt->points) {
      pts.push_back(json{{"x", p.x}, {"y", p.y}, {"label", p.foreground ? 1 : 0}});
    }
    json pj{{"points", pts}};
    if (m.prompt->box) {
      const auto& b = *m.prompt->box;
      pj["box"] = json::array({b.x0, b.y0, b.x1, b.y1});
    }
    body["prompt"] = pj;
  }
  if (m.scale) body["scale"] = json::array({m.scale->sx, m.scale->sy});
  put(body, "embedding_handle", m.embedding_handle);
  put(body, "score", m.score);
  put(body, "bytes", m.bytes);
  put(body, "retained", m.retained);
  put(body, "elapsed_s", m.elapsed_s);
  put(body, "percent", m.percent);
  put(body, "phase", m.phase);
  put(body, "code", m.code);
  put(body, "message", m.message);

  json frame{{"id", m.msg_id}, {"kind", to_string(m.kind)}, {"body", body}};
  std::string out = frame.dump(-1, ' ', false, json::error_handler_t::strict);
  out.push_back('\n');
  return out;
}

ControlMessage decode_frame(std::string_view frame) {
  if (frame.empty() || frame.back() != '\n') malformed("missing line terminator");
  frame.remove_suffix(1);
  if (frame.find('\n') != std::string_view::npos) malformed("embedded newline");

  json j;
  try {
    j = json::parse(frame);
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  if (!j.is_object()) malformed("frame must be a JSON object");

  ControlMessage m;
  try {
    const auto& id = j.at("id");
    if (!id.is_number_unsigned()) malformed("id must be an unsigned integer");
    m.msg_id = id.get<std::uint64_t>();
    const auto kind_name = j.at("kind").get<std::string>();
    const auto kind = parse_kind(kind_name);
    if (!kind) throw Error(ErrorCode::UnknownKind, "unknown message kind: " + kind_name);
    m.kind = *kind;

    const json body = j.value("body", json::object());
    if (!body.is_object()) malformed("body must be an object");
    for (const char* key : {"score", "elapsed_s", "percent", "version", "bytes", "retained"}) {
      require_number(body, key);
    }
    take(body, "version", m.version);
    take(body, "model_id", m.model_id);
    take(body, "path", m.path);
    if (auto it = body.find("tensor"); it != body.end()) m.tensor = tensor_from_json(*it);
    if (auto it = body.find("output"); it != body.end()) m.output = tensor_from_json(*it);
    if (auto it = body.find("region"); it != body.end()) {
      m.region = Region{it->at("x0").get<int>(), it->at("y0").get<int>(),
                        it->at("w").get<int>(), it->at("h").get<int>()};
    }
    if (auto it = body.find("prompt"); it != body.end()) {
      ModelPrompt p;
      for (const auto& pt : it->at("points")) {
        p.points.push_back(ModelPoint{pt.at("x").get<double>(), pt.at("y").get<double>(),
                                      pt.at("label").get<int>() != 0});
      }
      if (auto b = it->find("box"); b != it->end()) {
        if (!b->is_array() || b->size() != 4) malformed("box must have 4 numbers");
        p.box = ModelBox{(*b)[0].get<double>(), (*b)[1].get<double>(),
                         (*b)[2].get<double>(), (*b)[3].get<double>()};
      }
      m.prompt = std::move(p);
    }
    if (auto it = body.find("scale"); it != body.end()) {
      if (!it->is_array() || it->size() != 2) malformed("scale must have 2 numbers");
      m.scale = ScalePair{(*it)[0].get<double>(), (*it)[1].get<double>()};
    }
    take(body, "embedding_handle", m.embedding_handle);
    take(body, "score", m.score);
    take(body, "bytes", m.bytes);
    take(body, "retained", m.retained);
    take(body, "elapsed_s", m.elapsed_s);
    take(body, "percent", m.percent);
    take(body, "phase", m.phase);
    take(body, "code", m.code);
    take(body, "message", m.message);
  } catch (const json::exception& e) {
    malformed(e.what());
  }
  return m;
}

std::vector<ControlMessage> decode_stream(std::string_view bytes) {
  std::vector<ControlMessage> out;
  FrameReader reader;
  reader.feed(bytes);
  std::string line;
  while (reader.next_line(line)) out.push_back(decode_frame(line));
  if (reader.has_partial()) malformed("truncated final line");
  return out;
}

bool FrameReader::next_line(std::string& line) {
  const auto nl = buffer_.find('\n');
  if (nl == std::string::npos) return false;
  line.assign(buffer_, 0, nl + 1);
  buffer_.erase(0, nl + 1);
  return true;
}

void SequenceChecker::check(const ControlMessage& msg) {
  const std::uint64_t id = msg.msg_id;
  if (is_request(msg.kind)) {
    if (any_request_ && id <= last_request_) {
      throw Error(ErrorCode::DuplicateMsgId,
                  "request id " + std::to_string(id) + " does not increase");
    }
    any_request_ = true;
    last_request_ = id;
    return;
  }
  if ((any_reply_ && id < last_reply_) || terminated_.count(id) != 0) {
    throw Error(ErrorCode::DuplicateMsgId,
                "reply id " + std::to_string(id) + " repeats or goes backwards");
  }
  any_reply_ = true;
  last_reply_ = id;
  if (is_terminal_reply(msg.kind)) terminated_.insert(id);
}

std::string check_pairing(const std::vector<ControlMessage>& requests,
                          const std::vector<ControlMessage>& replies) {
  std::map<std::uint64_t, int> pending;
  for (const auto& r : requests) {
    if (!is_request(r.kind)) return "non-request in request trace";
    if (!pending.emplace(r.msg_id, 0).second) {
      return "duplicate request id " + std::to_string(r.msg_id);
    }
  }
  for (const auto& r : replies) {
    if (!is_terminal_reply(r.kind)) continue;
    auto it = pending.find(r.msg_id);
    if (it == pending.end()) return "reply to unknown id " + std::to_string(r.msg_id);
    if (++it->second > 1) return "second terminal reply for id " + std::to_string(r.msg_id);
  }
  for (const auto& [id, n] : pending) {
    if (n == 0) return "request " + std::to_string(id) + " never answered";
  }
  return {};
}

}  // namespace promptseg::protocol
