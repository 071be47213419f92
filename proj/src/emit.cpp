#include <fstream>
#include <ostream>
#include <sstream>

#include "chainforge/scenario.hpp"

namespace chainforge::scenario {

namespace {

// a0->Lnext->...->A with `depth` Lnext hops.
std::string chain_to_level(std::uint32_t depth) {
  std::string s = "a0";
  for (std::uint32_t i = 0; i < depth; ++i) s += "->Lnext";
  return s + "->A";
}

bool all_arrays(LinearLayout layout) { return layout != LinearLayout::LLinit_LLused; }
bool all_used(LinearLayout layout) { return layout == LinearLayout::allinit_allused; }

std::vector<std::uint32_t> used_levels(std::uint32_t k, LinearLayout layout) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = all_used(layout) ? 0 : k - 1; i < k; ++i) out.push_back(i);
  return out;
}

void emit_prologue(std::ostream& os, std::uint32_t k, TransferScheme scheme, LinearLayout layout) {
  os << "// Linear benchmark: k = " << k << ", transfer " << scheme_name(scheme) << ", layout "
     << layout_name(layout) << ".\n"
     << "#include <cstdio>\n"
     << "#include <cstdlib>\n"
     << "#include <cstring>\n"
     << "#include <openacc.h>\n\n"
     << "struct L {\n"
     << "  int nA;\n"
     << "  int nLnext;\n"
     << "  double* A;\n"
     << "  L* Lnext;\n"
     << "};\n\n"
     << "static const int kLevels = " << k << ";\n\n";
  if (scheme == TransferScheme::marshalling) {
    os << "static char* g_buffer = nullptr;\n"
       << "static size_t g_total = 0;\n"
       << "static size_t g_served = 0;\n\n"
       << "static void* arena_alloc(size_t bytes) {\n"
       << "  void* p = g_buffer + g_served;\n"
       << "  g_served += bytes;\n"
       << "  return p;\n"
       << "}\n\n";
  }
}

std::string allocation(TransferScheme scheme, const std::string& bytes) {
  if (scheme == TransferScheme::marshalling) return "arena_alloc(" + bytes + ")";
  return "std::malloc(" + bytes + ")";
}

void emit_build(std::ostream& os, TransferScheme scheme, LinearLayout layout) {
  if (scheme == TransferScheme::marshalling) {
    os << "  g_total = sizeof(L) * kLevels + sizeof(double) * (size_t)n * "
       << (all_arrays(layout) ? "kLevels" : "1") << ";\n"
       << "  g_buffer = (char*)std::malloc(g_total);\n";
  }
  os << "  L* nodes[kLevels];\n"
     << "  for (int i = 0; i < kLevels; ++i) {\n"
     << "    nodes[i] = (L*)" << allocation(scheme, "sizeof(L)") << ";\n"
     << "    std::memset(nodes[i], 0, sizeof(L));\n";
  if (all_arrays(layout)) {
    os << "    nodes[i]->nA = n;\n"
       << "    nodes[i]->A = (double*)" << allocation(scheme, "sizeof(double) * n") << ";\n"
       << "    for (int j = 0; j < n; ++j) nodes[i]->A[j] = i * 1000003.0 + j;\n";
  } else {
    os << "    if (i == kLevels - 1) {\n"
       << "      nodes[i]->nA = n;\n"
       << "      nodes[i]->A = (double*)" << allocation(scheme, "sizeof(double) * n") << ";\n"
       << "      for (int j = 0; j < n; ++j) nodes[i]->A[j] = i * 1000003.0 + j;\n"
       << "    }\n";
  }
  os << "  }\n"
     << "  for (int i = 0; i + 1 < kLevels; ++i) {\n"
     << "    nodes[i]->nLnext = 1;\n"
     << "    nodes[i]->Lnext = nodes[i + 1];\n"
     << "  }\n"
     << "  L* a0 = nodes[0];\n";
}

void emit_loop(std::ostream& os, const std::string& chain, const std::string& present, const char* indent) {
  os << indent << "#pragma acc parallel loop" << (present.empty() ? "" : " " + present) << "\n"
     << indent << "for (int i = 0; i < n; ++i) " << chain << "[i] *= scale;\n";
}

void emit_uvm(std::ostream& os, std::uint32_t k, LinearLayout layout) {
  os << "  // Managed memory: build with -ta=tesla:managed.\n";
  for (const auto level : used_levels(k, layout)) emit_loop(os, chain_to_level(level), "", "  ");
}

void emit_marshalling(std::ostream& os, std::uint32_t k, LinearLayout layout) {
  os << "  #pragma acc enter data copyin(g_buffer[0:g_total])\n"
     << "  for (int i = 0; i < kLevels; ++i) {\n"
     << "    if (nodes[i]->A) acc_attach((void**)&nodes[i]->A);\n"
     << "    if (nodes[i]->Lnext) acc_attach((void**)&nodes[i]->Lnext);\n"
     << "  }\n";
  for (const auto level : used_levels(k, layout)) emit_loop(os, chain_to_level(level), "present(g_buffer)", "  ");
  os << "  for (int i = kLevels - 1; i >= 0; --i) {\n"
     << "    if (nodes[i]->Lnext) acc_detach((void**)&nodes[i]->Lnext);\n"
     << "    if (nodes[i]->A) acc_detach((void**)&nodes[i]->A);\n"
     << "  }\n"
     << "  #pragma acc exit data copyout(g_buffer[0:g_total])\n";
}

void emit_pointerchain(std::ostream& os, std::uint32_t k, LinearLayout layout) {
  const auto levels = used_levels(k, layout);
  for (const auto level : levels) os << "  #pragma pointerchain declare(" << chain_to_level(level) << "{double*})\n";
  os << "\n  #pragma pointerchain region begin\n";
  for (const auto level : levels) os << "  #pragma acc enter data copyin(" << chain_to_level(level) << "[0:n])\n";
  os << "  #pragma pointerchain region end\n\n"
     << "  #pragma pointerchain region begin\n";
  for (const auto level : levels) {
    const auto chain = chain_to_level(level);
    emit_loop(os, chain, "present(" + chain + "[0:n])", "  ");
  }
  os << "  #pragma pointerchain region end\n\n"
     << "  #pragma pointerchain region begin\n";
  for (const auto level : levels) os << "  #pragma acc exit data copyout(" << chain_to_level(level) << "[0:n])\n";
  os << "  #pragma pointerchain region end\n";
}

}  // namespace

std::string benchmark_source(std::uint32_t k, TransferScheme scheme, LinearLayout layout) {
  if (k < 2) throw InvalidArgument("benchmark sources need k >= 2");
  if (scheme == TransferScheme::naive) throw InvalidArgument("no benchmark source exists for the naive scheme");
  std::ostringstream os;
  emit_prologue(os, k, scheme, layout);
  os << "int main(int argc, char** argv) {\n"
     << "  const int n = argc > 1 ? std::atoi(argv[1]) : 1000;\n"
     << "  const double scale = 2.0;\n";
  emit_build(os, scheme, layout);
  os << "\n";
  switch (scheme) {
    case TransferScheme::uvm: emit_uvm(os, k, layout); break;
    case TransferScheme::marshalling: emit_marshalling(os, k, layout); break;
    case TransferScheme::pointerchain: emit_pointerchain(os, k, layout); break;
    case TransferScheme::naive: break;
  }
  os << "\n  std::printf(\"%f\\n\", " << chain_to_level(k - 1) << "[0]);\n"
     << "  return 0;\n"
     << "}\n";
  return os.str();
}

std::vector<ManifestEntry> emit_benchmark_sources(std::uint32_t max_k, const std::filesystem::path& out_dir) {
  if (max_k < 2) throw InvalidArgument("max_k must be at least 2");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<ManifestEntry> entries;
  for (std::uint32_t k = 2; k <= max_k; ++k) {
    for (const auto scheme : {TransferScheme::uvm, TransferScheme::marshalling, TransferScheme::pointerchain}) {
      for (const auto layout : kAllLayouts) {
        const auto path = out_dir / ("linear_k" + std::to_string(k) + "_" + std::string(scheme_name(scheme)) + "_" +
                                     std::string(layout_name(layout)) + ".cpp");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + path.string());
        out << benchmark_source(k, scheme, layout);
        if (!out.flush()) throw IoError("short write to " + path.string());
        entries.push_back({path, k, scheme, layout});
      }
    }
  }
  std::ofstream manifest(out_dir / "manifest.csv", std::ios::binary | std::ios::trunc);
  if (!manifest) throw IoError("cannot write " + (out_dir / "manifest.csv").string());
  write_manifest(manifest, entries);
  return entries;
}

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries) {
  for (const auto& e : entries) {
    out << e.path.string() << ',' << e.k << ',' << scheme_name(e.scheme) << ',' << layout_name(e.layout) << '\n';
  }
}

}  // namespace chainforge::scenario
