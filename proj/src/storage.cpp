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

#include "cbasr/storage.hpp"

#include <cstring>
#include <fstream>

#include "cbasr/error.hpp"

namespace cbasr {

using nlohmann::json;

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::vector<json> rows;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kInput, path + ":" + std::to_string(line_no) +
                                         ": bad JSON: " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const std::string& path, const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  for (const auto& row : rows) out << row.dump() << "\n";
  if (!out) throw Error(ErrorKind::kIo, "short write: " + path);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorKind::kIo, "short write: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

struct BlobWriter::Impl {
  std::ofstream out;
};

BlobWriter::BlobWriter(const std::string& path) : impl_(new Impl) {
  impl_->out.open(path, std::ios::binary | std::ios::trunc);
  if (!impl_->out) {
    delete impl_;
    impl_ = nullptr;
    throw Error(ErrorKind::kIo, "cannot write " + path);
  }
}

BlobWriter::~BlobWriter() { delete impl_; }

uint64_t BlobWriter::append(const std::vector<float>& values) {
  uint64_t at = offset_;
  impl_->out.write(reinterpret_cast<const char*>(values.data()),
                   static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!impl_->out) throw Error(ErrorKind::kIo, "blob write failed");
  offset_ += values.size() * sizeof(float);
  return at;
}

void BlobWriter::close() {
  impl_->out.close();
  if (impl_->out.fail()) throw Error(ErrorKind::kIo, "blob close failed");
}

BlobReader::BlobReader(const std::string& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  in.seekg(0, std::ios::end);
  auto len = in.tellg();
  in.seekg(0);
  bytes_.resize(static_cast<size_t>(len));
  in.read(bytes_.data(), len);
  if (!in) throw Error(ErrorKind::kIo, "short read: " + path);
}

std::vector<float> BlobReader::read(uint64_t offset, size_t count) const {
  if (offset + count * sizeof(float) > bytes_.size()) {
    throw Error(ErrorKind::kInput,
                path_ + ": tensor range out of bounds (offset " +
                    std::to_string(offset) + ", count " +
                    std::to_string(count) + ")");
  }
  std::vector<float> out(count);
  std::memcpy(out.data(), bytes_.data() + offset, count * sizeof(float));
  return out;
}

uint64_t BlobReader::size_bytes() const { return bytes_.size(); }

std::vector<CorpusUtterance> load_corpus(const std::string& path) {
  std::vector<CorpusUtterance> out;
  for (const auto& row : read_jsonl(path)) {
    CorpusUtterance u;
    try {
      u.utterance_id = row.at("utterance_id").get<std::string>();
      u.transcript = row.value("transcript", "");
      u.audio_path = row.value("audio_path", "");
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kInput,
                  path + ": bad corpus row: " + std::string(e.what()));
    }
    out.push_back(std::move(u));
  }
  return out;
}

void save_corpus(const std::string& path,
                 const std::vector<CorpusUtterance>& corpus) {
  std::vector<json> rows;
  rows.reserve(corpus.size());
  for (const auto& u : corpus) {
    rows.push_back({{"utterance_id", u.utterance_id},
                    {"audio_path", u.audio_path},
                    {"transcript", u.transcript}});
  }
  write_jsonl(path, rows);
}

}  // namespace cbasr
