#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "boter/binary_io.hpp"
#include "boter/data_model.hpp"

namespace boter::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("boter-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& path) { return binary::read_file(path); }

/// Small benchmark for tests that train: same generator, fewer samples.
inline SyntheticSpec small_spec(std::uint64_t seed = 11) {
  SyntheticSpec spec;
  spec.rng_seed = seed;
  spec.n_samples = 80;
  spec.n_heldout = 40;
  spec.corpus_size = 400;
  spec.answer_vocab_size = 16;
  return spec;
}

inline Sample make_sample(std::string id, std::string question, std::vector<std::string> answers) {
  Sample s;
  s.id = std::move(id);
  s.question = std::move(question);
  s.answers = std::move(answers);
  return s;
}

}  // namespace boter::testing
