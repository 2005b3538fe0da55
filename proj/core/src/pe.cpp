#include "bns/pe.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <optional>

namespace bns::pe {
namespace {

constexpr std::uint16_t kDosMagic = 0x5a4d;      // "MZ"
constexpr std::uint32_t kPeSignature = 0x4550;   // "PE\0\0"
constexpr std::uint16_t kOptMagicPe32 = 0x10b;
constexpr std::uint16_t kOptMagicPe32Plus = 0x20b;
constexpr std::size_t kDosHeaderSize = 64;
constexpr std::size_t kCoffHeaderSize = 20;
constexpr std::size_t kSectionHeaderSize = 40;
constexpr std::size_t kImportDescriptorSize = 20;
// Caps keep the walk linear on hostile input.
constexpr std::size_t kMaxImportDescriptors = 4096;
constexpr std::size_t kMaxThunksPerDll = 65536;
constexpr std::size_t kMaxNameLength = 512;

// Bounds-checked little-endian reader. Any failed read marks the stream
// truncated; the caller stops at whatever structure it last completed.
class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> data) : data_(data) {}

  bool in_bounds(std::size_t offset, std::size_t length) const {
    return offset <= data_.size() && length <= data_.size() - offset;
  }

  std::optional<std::uint64_t> read(std::size_t offset, std::size_t width) {
    if (!in_bounds(offset, width)) {
      truncated_ = true;
      return std::nullopt;
    }
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < width; ++i) {
      value |= static_cast<std::uint64_t>(data_[offset + i]) << (8 * i);
    }
    return value;
  }

  std::optional<std::uint16_t> read_u16(std::size_t offset) {
    auto v = read(offset, 2);
    if (!v) return std::nullopt;
    return static_cast<std::uint16_t>(*v);
  }

  std::optional<std::uint32_t> read_u32(std::size_t offset) {
    auto v = read(offset, 4);
    if (!v) return std::nullopt;
    return static_cast<std::uint32_t>(*v);
  }

  std::optional<std::uint64_t> read_u64(std::size_t offset) {
    return read(offset, 8);
  }

  // NUL-terminated ASCII string, length-capped. Missing terminator counts
  // as truncation.
  std::optional<std::string> read_cstring(std::size_t offset) {
    std::string out;
    for (std::size_t i = 0; i < kMaxNameLength; ++i) {
      if (!in_bounds(offset + i, 1)) {
        truncated_ = true;
        return std::nullopt;
      }
      char c = static_cast<char>(data_[offset + i]);
      if (c == '\0') return out;
      out.push_back(c);
    }
    truncated_ = true;
    return std::nullopt;
  }

  bool truncated() const { return truncated_; }
  std::size_t size() const { return data_.size(); }

 private:
  std::span<const std::uint8_t> data_;
  bool truncated_ = false;
};

std::int64_t clamp_to_i64(std::uint64_t v) {
  constexpr auto kMax =
      static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
  return static_cast<std::int64_t>(std::min(v, kMax));
}

struct SectionMap {
  std::uint32_t virtual_address = 0;
  std::uint32_t virtual_size = 0;
  std::uint32_t raw_offset = 0;
  std::uint32_t raw_size = 0;
};

// RVA -> file offset. Before the first section the image maps the headers
// one-to-one; inside a section only the file-backed span is addressable.
std::optional<std::size_t> rva_to_offset(
    std::uint32_t rva, const std::vector<SectionMap>& sections,
    std::size_t file_size) {
  for (const SectionMap& s : sections) {
    std::uint32_t extent = std::max(s.virtual_size, s.raw_size);
    if (rva >= s.virtual_address && rva - s.virtual_address < extent) {
      std::uint32_t delta = rva - s.virtual_address;
      if (delta >= s.raw_size) return std::nullopt;  // zero-fill region
      return static_cast<std::size_t>(s.raw_offset) + delta;
    }
  }
  if (rva < file_size && (sections.empty() || rva < sections[0].raw_offset)) {
    return static_cast<std::size_t>(rva);  // header region
  }
  return std::nullopt;
}

struct FieldWalker {
  Cursor& cursor;
  std::vector<std::pair<std::string, std::int64_t>>& fields;
  std::size_t offset;
  std::size_t end;  // first offset past the structure being walked
  bool ok = true;

  // Reads the next field if it fits both the buffer and the declared
  // structure size; emits it under `name`.
  std::optional<std::uint64_t> take(const char* name, std::size_t width) {
    if (!ok) return std::nullopt;
    if (offset + width > end) {
      ok = false;
      return std::nullopt;
    }
    auto v = cursor.read(offset, width);
    if (!v) {
      ok = false;
      return std::nullopt;
    }
    offset += width;
    fields.emplace_back(name, clamp_to_i64(*v));
    return v;
  }

  void skip(std::size_t width) { offset += width; }
};

void parse_imports(Cursor& cursor, std::uint32_t import_rva, bool pe32_plus,
                   const std::vector<SectionMap>& sections,
                   PeSummary& summary) {
  auto dir_offset = rva_to_offset(import_rva, sections, cursor.size());
  if (!dir_offset) return;

  for (std::size_t k = 0; k < kMaxImportDescriptors; ++k) {
    std::size_t desc = *dir_offset + k * kImportDescriptorSize;
    auto original_first_thunk = cursor.read_u32(desc);
    auto name_rva = cursor.read_u32(desc + 12);
    auto first_thunk = cursor.read_u32(desc + 16);
    if (!original_first_thunk || !name_rva || !first_thunk) return;
    if (*original_first_thunk == 0 && *name_rva == 0 && *first_thunk == 0) {
      return;  // all-zero terminator
    }

    auto dll_offset = rva_to_offset(*name_rva, sections, cursor.size());
    if (!dll_offset) continue;
    auto dll_name = cursor.read_cstring(*dll_offset);
    if (!dll_name) return;
    if (dll_name->empty()) continue;

    std::uint32_t thunk_rva =
        *original_first_thunk != 0 ? *original_first_thunk : *first_thunk;
    auto thunk_offset = rva_to_offset(thunk_rva, sections, cursor.size());
    if (!thunk_offset) continue;

    const std::size_t width = pe32_plus ? 8 : 4;
    for (std::size_t t = 0; t < kMaxThunksPerDll; ++t) {
      auto entry = cursor.read(*thunk_offset + t * width, width);
      if (!entry || *entry == 0) break;
      const std::uint64_t ordinal_flag = pe32_plus ? (1ull << 63) : (1ull << 31);
      if (*entry & ordinal_flag) {
        summary.imports.emplace_back(
            *dll_name, "ord" + std::to_string(*entry & 0xffff));
        continue;
      }
      auto hint_name = rva_to_offset(static_cast<std::uint32_t>(*entry),
                                     sections, cursor.size());
      if (!hint_name) break;
      auto function = cursor.read_cstring(*hint_name + 2);  // skip hint
      if (!function) return;
      summary.imports.emplace_back(*dll_name, *function);
    }
  }
}

}  // namespace

PeSummary parse_pe(std::span<const std::uint8_t> raw) {
  PeSummary summary;
  Cursor cursor(raw);
  auto finish = [&] {
    summary.numeric_fields.emplace_back("parse_truncated",
                                        cursor.truncated() ? 1 : 0);
    return summary;
  };

  if (raw.size() < 2 || raw[0] != 'M' || raw[1] != 'Z') return finish();
  if (!cursor.in_bounds(0, kDosHeaderSize)) {
    (void)cursor.read(0, kDosHeaderSize);  // records the truncation
    return finish();
  }

  FieldWalker dos{cursor, summary.numeric_fields, 0, kDosHeaderSize};
  static constexpr std::array<const char*, 14> kDosU16Front = {
      "e_magic", "e_cblp", "e_cp",       "e_crlc", "e_cparhdr",
      "e_minalloc", "e_maxalloc", "e_ss", "e_sp",  "e_csum",
      "e_ip",    "e_cs",   "e_lfarlc",   "e_ovno"};
  for (const char* name : kDosU16Front) dos.take(name, 2);
  dos.take("e_res_0", 2);
  dos.take("e_res_1", 2);
  dos.take("e_res_2", 2);
  dos.take("e_res_3", 2);
  dos.take("e_oemid", 2);
  dos.take("e_oeminfo", 2);
  for (int i = 0; i < 10; ++i) {
    dos.take(("e_res2_" + std::to_string(i)).c_str(), 2);
  }
  auto lfanew = dos.take("e_lfanew", 4);
  if (!lfanew) return finish();
  // e_lfanew is signed on disk; reject negative offsets.
  auto pe_offset = static_cast<std::int32_t>(static_cast<std::uint32_t>(*lfanew));
  summary.numeric_fields.back().second = pe_offset;
  if (pe_offset < 0) return finish();

  auto signature = cursor.read_u32(static_cast<std::size_t>(pe_offset));
  if (!signature || *signature != kPeSignature) return finish();
  summary.is_pe = true;

  const std::size_t coff = static_cast<std::size_t>(pe_offset) + 4;
  if (!cursor.in_bounds(coff, kCoffHeaderSize)) {
    (void)cursor.read(coff, kCoffHeaderSize);
    return finish();
  }
  FieldWalker coff_walk{cursor, summary.numeric_fields, coff,
                        coff + kCoffHeaderSize};
  coff_walk.take("machine", 2);
  auto section_count = coff_walk.take("number_of_sections", 2);
  auto timestamp = coff_walk.take("compile_timestamp", 4);
  coff_walk.take("pointer_to_symbol_table", 4);
  coff_walk.take("number_of_symbols", 4);
  auto optional_size = coff_walk.take("size_of_optional_header", 2);
  coff_walk.take("characteristics", 2);
  summary.compile_timestamp = clamp_to_i64(timestamp.value_or(0));

  // Optional header (PE32 or PE32+); unknown magic values end the walk.
  const std::size_t opt = coff + kCoffHeaderSize;
  const std::size_t opt_size = static_cast<std::size_t>(optional_size.value_or(0));
  bool pe32_plus = false;
  std::uint32_t import_rva = 0;
  if (opt_size >= 2) {
    FieldWalker w{cursor, summary.numeric_fields, opt, opt + opt_size};
    auto magic = w.take("magic", 2);
    if (magic && (*magic == kOptMagicPe32 || *magic == kOptMagicPe32Plus)) {
      pe32_plus = *magic == kOptMagicPe32Plus;
      w.take("major_linker_version", 1);
      w.take("minor_linker_version", 1);
      w.take("size_of_code", 4);
      w.take("size_of_initialized_data", 4);
      w.take("size_of_uninitialized_data", 4);
      w.take("address_of_entry_point", 4);
      w.take("base_of_code", 4);
      if (!pe32_plus) w.take("base_of_data", 4);
      w.take("image_base", pe32_plus ? 8 : 4);
      w.take("section_alignment", 4);
      w.take("file_alignment", 4);
      w.take("major_operating_system_version", 2);
      w.take("minor_operating_system_version", 2);
      w.take("major_image_version", 2);
      w.take("minor_image_version", 2);
      w.take("major_subsystem_version", 2);
      w.take("minor_subsystem_version", 2);
      w.take("win32_version_value", 4);
      w.take("size_of_image", 4);
      w.take("size_of_headers", 4);
      w.take("checksum", 4);
      w.take("subsystem", 2);
      w.take("dll_characteristics", 2);
      const std::size_t addr_width = pe32_plus ? 8 : 4;
      w.take("size_of_stack_reserve", addr_width);
      w.take("size_of_stack_commit", addr_width);
      w.take("size_of_heap_reserve", addr_width);
      w.take("size_of_heap_commit", addr_width);
      w.take("loader_flags", 4);
      auto dir_count = w.take("number_of_rva_and_sizes", 4);
      if (dir_count && *dir_count >= 2 && w.ok &&
          w.offset + 16 <= opt + opt_size) {
        // Data directory 1 is the import table.
        auto rva = cursor.read_u32(w.offset + 8);
        if (rva) import_rva = *rva;
      }
    }
  }

  // Section table sits right after the declared optional header size.
  std::vector<SectionMap> sections;
  const std::size_t section_table = opt + opt_size;
  const std::size_t n_sections =
      static_cast<std::size_t>(section_count.value_or(0));
  for (std::size_t i = 0; i < n_sections; ++i) {
    std::size_t s = section_table + i * kSectionHeaderSize;
    if (!cursor.in_bounds(s, kSectionHeaderSize)) {
      (void)cursor.read(s, kSectionHeaderSize);
      break;
    }
    auto virtual_size = cursor.read_u32(s + 8);
    auto virtual_address = cursor.read_u32(s + 12);
    auto raw_size = cursor.read_u32(s + 16);
    auto raw_offset = cursor.read_u32(s + 20);
    auto characteristics = cursor.read_u32(s + 36);
    const std::string suffix = "_" + std::to_string(i);
    summary.numeric_fields.emplace_back("virtual_size" + suffix,
                                        clamp_to_i64(*virtual_size));
    summary.numeric_fields.emplace_back("virtual_address" + suffix,
                                        clamp_to_i64(*virtual_address));
    summary.numeric_fields.emplace_back("size_of_raw_data" + suffix,
                                        clamp_to_i64(*raw_size));
    summary.numeric_fields.emplace_back("characteristics" + suffix,
                                        clamp_to_i64(*characteristics));
    sections.push_back({*virtual_address, *virtual_size, *raw_offset,
                        *raw_size});
  }

  if (import_rva != 0) {
    parse_imports(cursor, import_rva, pe32_plus, sections, summary);
  }
  return finish();
}

std::vector<std::pair<std::string, std::string>> extract_imports(
    const PeSummary& summary) {
  return summary.imports;
}

}  // namespace bns::pe
