#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace coordsr {

struct StudyPair {
  std::string pair_id;
  std::string left;   // file name under <study>/pairs/
  std::string right;
};

struct StudyDescriptor {
  std::string study_id;
  std::uint64_t seed = 0;
  std::vector<StudyPair> pairs;
  std::string anchors_json = "{}";  // opaque Likert anchor text for the UI
};

/// Reads <dir>/study.json. Throws ConfigError when malformed.
StudyDescriptor load_study(const std::filesystem::path& dir);

struct StudyKey {
  std::string study_id;
  std::string method_a;
  std::string method_b;
  std::map<std::string, bool> a_left;  // pair id -> method A shown on the left
};

StudyKey load_study_key(const std::filesystem::path& path);

/// Status code plus JSON body (empty for 204).
struct ApiReply {
  int status = 200;
  std::string body;
};

struct Tally {
  std::array<int, 5> sharpness{};
  std::array<int, 5> noise{};
  int responses = 0;
  double mean_review_ms = 0.0;
};

/// Likert score on the left/right scale re-expressed as A-vs-B preference
/// (1 = strongly prefer A).
int orient_score(int score, bool a_left);

/// Session bookkeeping for one study with an append-only JSON-lines log.
///
/// Log lines:
///   {"type":"session","session_id","study_id","rater","created_at","order":[pair ids]}
///   {"type":"served","session_id","pair_id","index","served_at"}
///   {"type":"response","session_id","pair_id","index","sharpness","noise",
///    "served_at","submitted_at"}
/// Every line is fsync'ed before the call returns. Construction replays an
/// existing log; a torn final line is ignored.
class StudyService {
 public:
  using Clock = std::function<std::int64_t()>;

  StudyService(StudyDescriptor study, std::optional<StudyKey> key, std::filesystem::path log_path,
               Clock clock = {});
  ~StudyService();
  StudyService(const StudyService&) = delete;
  StudyService& operator=(const StudyService&) = delete;

  const StudyDescriptor& study() const { return study_; }

  /// GET /api/studies/{id}
  ApiReply study_info(const std::string& study_id) const;
  /// POST /api/sessions {rater, study_id}
  ApiReply create_session(const std::string& body);
  /// GET /api/sessions/{id}/next
  ApiReply next(const std::string& session_id);
  /// POST /api/sessions/{id}/responses {pair_id, sharpness, noise}
  ApiReply respond(const std::string& session_id, const std::string& body);
  /// GET /api/studies/{id}/summary
  ApiReply summary(const std::string& study_id) const;

  Tally tally() const;
  std::size_t session_count() const;

 private:
  struct Session {
    std::string rater;
    std::int64_t created_at = 0;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
    std::map<std::size_t, std::int64_t> served_at;
  };
  struct Response {
    std::string pair_id;
    int sharpness = 0;
    int noise = 0;
    std::int64_t served_at = 0;
    std::int64_t submitted_at = 0;
  };

  void replay();
  void append(const std::string& line);
  std::int64_t now() const;

  StudyDescriptor study_;
  std::optional<StudyKey> key_;
  std::filesystem::path log_path_;
  Clock clock_;
  int fd_ = -1;
  std::map<std::string, std::size_t> pair_index_;
  std::map<std::string, Session> sessions_;
  std::vector<Response> responses_;
  mutable std::mutex mu_;
};

}  // namespace coordsr
