#include "coordsr/study.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <random>
#include <iterator>
#include <sstream>

#include "coordsr/dataset.hpp"
#include "coordsr/errors.hpp"
#include "json.hpp"

namespace coordsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + p.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ApiReply reply(int status, const json& j) { return {status, j.dump()}; }
ApiReply error(int status, const std::string& msg) { return reply(status, {{"error", msg}}); }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string random_id() {
  std::random_device rd;
  std::string out;
  static const char* hex = "0123456789abcdef";
  for (int i = 0; i < 8; ++i) {
    std::uint32_t v = rd();
    for (int k = 0; k < 4; ++k) {
      out += hex[(v >> 4) & 0xF];
      out += hex[v & 0xF];
      v >>= 8;
    }
  }
  return out;
}

}  // namespace

StudyDescriptor load_study(const fs::path& dir) {
  try {
    const json j = json::parse(read_text(dir / "study.json"));
    StudyDescriptor s;
    s.study_id = j.at("study_id").get<std::string>();
    s.seed = j.value("seed", std::uint64_t{0});
    for (const auto& p : j.at("pairs")) {
      s.pairs.push_back({p.at("pair_id").get<std::string>(), p.at("left").get<std::string>(),
                         p.at("right").get<std::string>()});
    }
    if (j.contains("anchors")) s.anchors_json = j["anchors"].dump();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError("malformed study.json: " + std::string(e.what()));
  }
}

StudyKey load_study_key(const fs::path& path) {
  try {
    const json j = json::parse(read_text(path));
    StudyKey k;
    k.study_id = j.at("study_id").get<std::string>();
    k.method_a = j.at("method_a").get<std::string>();
    k.method_b = j.at("method_b").get<std::string>();
    for (const auto& p : j.at("pairs")) {
      k.a_left[p.at("pair_id").get<std::string>()] = p.at("a_side").get<std::string>() == "left";
    }
    return k;
  } catch (const json::exception& e) {
    throw ConfigError("malformed key file: " + std::string(e.what()));
  }
}

int orient_score(int score, bool a_left) { return a_left ? score : 6 - score; }

StudyService::StudyService(StudyDescriptor study, std::optional<StudyKey> key, fs::path log_path,
                           Clock clock)
    : study_(std::move(study)), key_(std::move(key)), log_path_(std::move(log_path)), clock_(std::move(clock)) {
  for (std::size_t i = 0; i < study_.pairs.size(); ++i) pair_index_[study_.pairs[i].pair_id] = i;
  if (key_ && key_->study_id != study_.study_id) {
    throw ConfigError("key file belongs to study '" + key_->study_id + "', not '" + study_.study_id + "'");
  }
  replay();
  if (log_path_.has_parent_path()) fs::create_directories(log_path_.parent_path());
  fd_ = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw std::runtime_error("cannot open log " + log_path_.string() + ": " + std::strerror(errno));
}

StudyService::~StudyService() {
  if (fd_ >= 0) ::close(fd_);
}

std::int64_t StudyService::now() const {
  if (clock_) return clock_();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void StudyService::replay() {
  std::ifstream is(log_path_, std::ios::binary);
  if (!is) return;
  const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  is.close();
  // an unterminated tail is a write cut short by a crash; drop it so the
  // next append starts on a fresh line
  const std::size_t complete = text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1;
  if (complete < text.size()) fs::resize_file(log_path_, complete);

  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < complete) {
    const std::size_t end = text.find('\n', start);
    if (end > start) lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  for (std::size_t n = 0; n < lines.size(); ++n) {
    json j;
    try {
      j = json::parse(lines[n]);
    } catch (const json::exception&) {
      throw ConfigError("corrupt study log line " + std::to_string(n + 1));
    }
    const std::string type = j.value("type", "");
    const std::string sid = j.value("session_id", "");
    if (type == "session") {
      Session s;
      s.rater = j.value("rater", "");
      s.created_at = j.value("created_at", std::int64_t{0});
      for (const auto& p : j.at("order")) s.order.push_back(pair_index_.at(p.get<std::string>()));
      sessions_[sid] = std::move(s);
    } else if (type == "served") {
      sessions_.at(sid).served_at[j.at("index").get<std::size_t>()] = j.at("served_at").get<std::int64_t>();
    } else if (type == "response") {
      Session& s = sessions_.at(sid);
      responses_.push_back({j.at("pair_id").get<std::string>(), j.at("sharpness").get<int>(),
                            j.at("noise").get<int>(), j.at("served_at").get<std::int64_t>(),
                            j.at("submitted_at").get<std::int64_t>()});
      s.cursor = j.at("index").get<std::size_t>() + 1;
    }
  }
}

void StudyService::append(const std::string& line) {
  const std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t w = ::write(fd_, data.data() + off, data.size() - off);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("log write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(w);
  }
  if (::fsync(fd_) != 0) throw std::runtime_error(std::string("log fsync failed: ") + std::strerror(errno));
}

ApiReply StudyService::study_info(const std::string& study_id) const {
  if (study_id != study_.study_id) return error(404, "unknown study");
  return reply(200, {{"study_id", study_.study_id},
                     {"n_pairs", study_.pairs.size()},
                     {"anchors", json::parse(study_.anchors_json)}});
}

ApiReply StudyService::create_session(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return error(400, "body is not valid JSON");
  }
  if (!j.is_object() || !j.contains("rater") || !j["rater"].is_string() || !j.contains("study_id") ||
      !j["study_id"].is_string()) {
    return error(400, "expected {rater: string, study_id: string}");
  }
  const std::string rater = j["rater"].get<std::string>();
  if (j["study_id"].get<std::string>() != study_.study_id) return error(404, "unknown study");

  std::lock_guard lock(mu_);
  const std::uint64_t seed =
      splitmix64(study_.seed ^ fnv1a(rater) ^ splitmix64(static_cast<std::uint64_t>(sessions_.size())));
  Session s;
  s.rater = rater;
  s.created_at = now();
  s.order = seeded_permutation(study_.pairs.size(), seed);
  std::string id;
  do {
    id = random_id();
  } while (sessions_.count(id));
  json order = json::array();
  for (std::size_t i : s.order) order.push_back(study_.pairs[i].pair_id);
  append(json{{"type", "session"}, {"session_id", id}, {"study_id", study_.study_id}, {"rater", rater},
              {"created_at", s.created_at}, {"order", order}}
             .dump());
  sessions_[id] = std::move(s);
  return reply(201, {{"session_id", id}, {"n_pairs", study_.pairs.size()}});
}

ApiReply StudyService::next(const std::string& session_id) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return error(404, "unknown session");
  Session& s = it->second;
  if (s.cursor >= s.order.size()) return {204, ""};
  const StudyPair& p = study_.pairs[s.order[s.cursor]];
  if (!s.served_at.count(s.cursor)) {
    const std::int64_t t = now();
    append(json{{"type", "served"}, {"session_id", session_id}, {"pair_id", p.pair_id}, {"index", s.cursor},
                {"served_at", t}}
               .dump());
    s.served_at[s.cursor] = t;
  }
  return reply(200, {{"pair_id", p.pair_id},
                     {"left_url", "/pairs/" + p.left},
                     {"right_url", "/pairs/" + p.right},
                     {"index", s.cursor},
                     {"total", s.order.size()},
                     {"served_at", s.served_at[s.cursor]}});
}

ApiReply StudyService::respond(const std::string& session_id, const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    return error(400, "body is not valid JSON");
  }
  if (!j.is_object() || !j.contains("pair_id") || !j["pair_id"].is_string()) {
    return error(400, "expected {pair_id: string, sharpness: 1-5, noise: 1-5}");
  }
  for (const char* k : {"sharpness", "noise"}) {
    if (!j.contains(k) || !j[k].is_number_integer() || j[k].get<int>() < 1 || j[k].get<int>() > 5) {
      return error(400, std::string(k) + " must be an integer from 1 to 5");
    }
  }
  const std::string pair_id = j["pair_id"].get<std::string>();

  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return error(404, "unknown session");
  Session& s = it->second;
  if (s.cursor >= s.order.size() || study_.pairs[s.order[s.cursor]].pair_id != pair_id) {
    return error(409, "pair " + pair_id + " is not the session's current pair");
  }
  const std::int64_t t = now();
  if (!s.served_at.count(s.cursor)) {
    append(json{{"type", "served"}, {"session_id", session_id}, {"pair_id", pair_id}, {"index", s.cursor},
                {"served_at", t}}
               .dump());
    s.served_at[s.cursor] = t;
  }
  Response r{pair_id, j["sharpness"].get<int>(), j["noise"].get<int>(), s.served_at[s.cursor],
             std::max(t, s.served_at[s.cursor])};
  append(json{{"type", "response"},
              {"session_id", session_id},
              {"pair_id", pair_id},
              {"index", s.cursor},
              {"sharpness", r.sharpness},
              {"noise", r.noise},
              {"served_at", r.served_at},
              {"submitted_at", r.submitted_at}}
             .dump());
  responses_.push_back(r);
  ++s.cursor;
  return reply(200, {{"accepted", true}, {"next_index", s.cursor}});
}

Tally StudyService::tally() const {
  std::lock_guard lock(mu_);
  Tally t;
  if (!key_) return t;
  double review = 0.0;
  for (const Response& r : responses_) {
    const bool a_left = key_->a_left.at(r.pair_id);
    ++t.sharpness[orient_score(r.sharpness, a_left) - 1];
    ++t.noise[orient_score(r.noise, a_left) - 1];
    review += static_cast<double>(r.submitted_at - r.served_at);
    ++t.responses;
  }
  if (t.responses > 0) t.mean_review_ms = review / t.responses;
  return t;
}

ApiReply StudyService::summary(const std::string& study_id) const {
  if (study_id != study_.study_id) return error(404, "unknown study");
  if (!key_) return error(503, "no key file loaded");
  const Tally t = tally();
  return reply(200, {{"study_id", study_.study_id},
                     {"method_a", key_->method_a},
                     {"method_b", key_->method_b},
                     {"orientation", "1 = strongly prefer method_a, 3 = equivalent, 5 = strongly prefer method_b"},
                     {"responses", t.responses},
                     {"sharpness", t.sharpness},
                     {"noise", t.noise},
                     {"mean_review_ms", t.mean_review_ms}});
}

std::size_t StudyService::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

}  // namespace coordsr
