#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rada/corpus.hpp"

namespace rada::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

std::filesystem::path fixtures_dir();

// Vocabularies with no word in common.
const std::vector<std::string>& biomedical_words();
const std::vector<std::string>& computing_words();
const std::vector<std::string>& policy_words();

// Labeled QA seed: contexts of `context_len` words drawn from vocab, question
// "what about <5 context words>", answer a 2-word context span.
SeedDataset make_qa_seed(const std::vector<std::string>& vocab, std::size_t n, std::uint64_t seed,
                         const std::string& id_prefix = "seed-", std::size_t context_len = 24,
                         const std::string& domain = "");

// Store entries in the same shape; complete=false leaves out question/answer.
std::vector<StoreEntry> make_store_entries(const std::vector<std::string>& vocab, std::size_t n, std::uint64_t seed,
                                           const std::string& id_prefix, const std::string& domain,
                                           bool complete = true, std::size_t context_len = 24);

// MCQ seed / store entries with 4 distinct options.
SeedDataset make_mcq_seed(const std::vector<std::string>& vocab, std::size_t n, std::uint64_t seed);
std::vector<StoreEntry> make_mcq_store_entries(const std::vector<std::string>& vocab, std::size_t n,
                                               std::uint64_t seed, const std::string& id_prefix,
                                               const std::string& domain);

// Writes store entries (un-namespaced ids: the part after "::" if present).
void write_store_file(const std::filesystem::path& path, const std::vector<StoreEntry>& entries);

}  // namespace rada::testing
