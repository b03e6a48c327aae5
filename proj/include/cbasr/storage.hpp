// Copyright (c) 2026 cbasr authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CBASR_STORAGE_HPP_
#define CBASR_STORAGE_HPP_

#include <string>
#include <vector>

#include <json.hpp>

namespace cbasr {

// One line per JSON object; blank lines ignored.
std::vector<nlohmann::json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path,
                 const std::vector<nlohmann::json>& rows);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Raw little-endian float32 blob with offsets tracked by the callers
// (entity databases and dataset shards share this format).
class BlobWriter {
 public:
  explicit BlobWriter(const std::string& path);
  ~BlobWriter();

  // Returns the byte offset the tensor was written at.
  uint64_t append(const std::vector<float>& values);
  uint64_t bytes_written() const { return offset_; }
  void close();

 private:
  struct Impl;
  Impl* impl_;
  uint64_t offset_ = 0;
};

class BlobReader {
 public:
  explicit BlobReader(const std::string& path);
  std::vector<float> read(uint64_t offset, size_t count) const;
  uint64_t size_bytes() const;

 private:
  std::string path_;
  std::vector<char> bytes_;
};

// Evaluation corpus row: {utterance_id, audio_path, transcript}.
struct CorpusUtterance {
  std::string utterance_id;
  std::string audio_path;  // empty: synthesize from the transcript (mock runs)
  std::string transcript;
};

std::vector<CorpusUtterance> load_corpus(const std::string& path);
void save_corpus(const std::string& path,
                 const std::vector<CorpusUtterance>& corpus);

}  // namespace cbasr

#endif  // CBASR_STORAGE_HPP_
