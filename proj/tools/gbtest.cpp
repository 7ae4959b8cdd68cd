#include <fstream>
#include <iostream>

#include "gbtest_cli.hpp"

int main(int argc, char** argv) {
    using namespace gbt::cli;
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        const Outputs o = execute(args);
        for (const auto& [path, content] : o.files) {
            std::ofstream f(path, std::ios::binary);
            if (!f) {
                std::cerr << "error: cannot write '" << path << "'\n";
                return kInputError;
            }
            f << content;
        }
        std::cout << o.stdout_text;
        if (o.code == kDegenerate)
            std::cerr << "degenerate null variance: see the warnings/explanation in the output\n";
        return o.code;
    } catch (const CLI::CallForVersion&) {
        std::cout << gbt::kVersion << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\nrun 'gbtest --help' or 'gbtest <subcommand> --help' for usage\n";
        return kInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    }
}
